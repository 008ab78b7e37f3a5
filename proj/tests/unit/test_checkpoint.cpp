#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "fcenet/checkpoint.hpp"
#include "test_util.hpp"

using namespace fcenet;

namespace {

ModelConfig small_config() {
    ModelConfig mc;
    mc.base_channels = 4;
    mc.blocks_per_scale = 1;
    mc.k_filters = 3;
    mc.patch_height = 16;
    mc.patch_width = 32;
    return mc;
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / (std::string("fcenet_ckpt_") + name);
}

}  // namespace

TEST_CASE("checkpoint roundtrip") {
    ModelWeights w(small_config());
    w.init(7);
    OptimState st;
    st.bind(w.params());
    st.step = 12;
    st.total_steps = 40;
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        st.m[i] = test::random_tensor(st.m[i].shape(), 200 + i);
        st.v[i] = test::random_tensor(st.v[i].shape(), 300 + i, 0.0, 1.0);
    }

    const auto p1 = temp_path("a.bin"), p2 = temp_path("b.bin");
    write_checkpoint(p1.string(), w, &st);
    const LoadedCheckpoint back = read_checkpoint(p1.string());
    REQUIRE(back.optim.has_value());
    write_checkpoint(p2.string(), back.weights, &*back.optim);
    CHECK(read_file(p1) == read_file(p2));

    CHECK(back.weights.config() == small_config());
    CHECK(back.optim->step == 12);
    CHECK(back.optim->total_steps == 40);
    for (std::size_t i = 0; i < w.params().size(); ++i) {
        const Tensor& a = w.params()[i].value;
        const Tensor& b = back.weights.params()[i].value;
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(b[j] == static_cast<double>(static_cast<float>(a[j])));
    }

    const LoadedCheckpoint bare = deserialize_checkpoint(serialize_checkpoint(w));
    CHECK_FALSE(bare.optim.has_value());
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("checkpoint header") {
    ModelWeights w(small_config());
    w.init(8);
    const std::string bytes = serialize_checkpoint(w);
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.substr(0, 4) == "FCEN");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    CHECK(version == kCheckpointVersion);
}

TEST_CASE("corrupt checkpoints are rejected") {
    ModelWeights w(small_config());
    w.init(9);
    const std::string good = serialize_checkpoint(w);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_checkpoint(bad_magic), CheckpointError);

    std::string bad_version = good;
    bad_version[4] = 9;
    CHECK_THROWS_AS(deserialize_checkpoint(bad_version), CheckpointError);

    CHECK_THROWS_AS(deserialize_checkpoint(good.substr(0, good.size() / 2)), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(good + "x"), CheckpointError);
    CHECK_THROWS_AS(deserialize_checkpoint(""), CheckpointError);
    CHECK_THROWS_AS(read_checkpoint(temp_path("missing.bin").string()), IoError);
}

TEST_CASE("atomic writes leave no partial file") {
    const auto dir = temp_path("dir");
    std::filesystem::create_directories(dir);
    const auto target = dir / "out.bin";
    write_file_atomic(target, "first");
    CHECK(read_file(target) == "first");
    write_file_atomic(target, "second");
    CHECK(read_file(target) == "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
    CHECK(files == 1);
    CHECK_THROWS_AS(write_file_atomic(dir / "no" / "such" / "x.bin", "x"), IoError);
    std::filesystem::remove_all(dir);
}
