#include <doctest.h>

#include <cmath>

#include "fcenet/checkpoint.hpp"
#include "fcenet/gradcheck_suite.hpp"
#include "fcenet/network.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

namespace {

Tensor roll(const Tensor& t, int dy, int dx) {
    Tensor out(t.shape());
    const int H = t.height(), W = t.width();
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out(c, (y + dy + H) % H, (x + dx + W) % W) = t(c, y, x);
    return out;
}

bool identical(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("forward contract at 64x64") {
    ModelWeights w(ModelConfig{});
    w.init(1);
    const Tensor noisy = random_tensor({3, 64, 64}, 160, 0.0, 1.0);
    const Tensor nir = random_tensor({1, 64, 64}, 161, 0.0, 1.0);
    const ForwardOutput a = fcenet_forward(noisy, nir, w);
    CHECK(a.x1.shape() == Shape{3, 64, 64});
    CHECK(a.x2.shape() == Shape{3, 64, 64});
    CHECK(a.x1.value().all_finite());
    CHECK(a.x2.value().all_finite());

    const ForwardOutput b = fcenet_forward(noisy, nir, w);
    CHECK(identical(a.x2.value(), b.x2.value()));

    // Shifting the pair by 4 pixels moves the output by a finite, bounded amount.
    const ForwardOutput s = fcenet_forward(roll(noisy, 4, 4), roll(nir, 4, 4), w);
    const Tensor back = roll(s.x2.value(), -4, -4);
    CHECK(back.all_finite());
    CHECK(max_abs_diff(back, a.x2.value()) < 10.0);

    FusionDiagnostics diag;
    fcenet_forward(ag::constant(noisy), ag::constant(nir), w, nullptr, &diag);
    CHECK(std::isfinite(diag.max_imag_residue));

    CHECK_THROWS_AS(fcenet_forward(Tensor(3, 32, 32), Tensor(1, 32, 32), w), ShapeError);
    CHECK_THROWS_AS(fcenet_forward(Tensor(3, 64, 64), Tensor(3, 64, 64), w), ShapeError);
}

TEST_CASE("zero output heads") {
    ModelWeights w(ModelConfig{});
    w.init(2);
    w.zero_output_heads();
    const Tensor noisy = random_tensor({3, 64, 64}, 162, 0.0, 1.0);
    const ForwardOutput out = fcenet_forward(noisy, random_tensor({1, 64, 64}, 163, 0.0, 1.0), w);
    CHECK(identical(out.x1.value(), noisy));
    CHECK(identical(out.x2.value(), noisy));
}

TEST_CASE("tiled denoising") {
    ModelConfig mc;
    mc.base_channels = 4;
    mc.blocks_per_scale = 1;
    mc.patch_height = mc.patch_width = 32;
    ModelWeights w(mc);
    w.init(5);
    const Tensor noisy = random_tensor({3, 32, 64}, 166, 0.0, 1.0);
    const Tensor nir = random_tensor({1, 32, 64}, 167, 0.0, 1.0);
    const Tensor out = denoise_image(noisy, nir, w);
    REQUIRE(out.shape() == noisy.shape());
    // The right tile equals a direct forward pass on that crop, clamped.
    Tensor cn(3, 32, 32), cr(1, 32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            for (int c = 0; c < 3; ++c) cn(c, y, x) = noisy(c, y, 32 + x);
            cr(0, y, x) = nir(0, y, 32 + x);
        }
    const Tensor direct = fcenet_forward(cn, cr, w).x2.value();
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                worst = std::max(worst, std::abs(out(c, y, 32 + x) - std::clamp(direct(c, y, x), 0.0, 1.0)));
    CHECK(worst == 0.0);
    for (double v : out.data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK_THROWS_AS(denoise_image(Tensor(3, 48, 32), Tensor(1, 48, 32), w), ShapeError);
    CHECK_THROWS_AS(denoise_image(noisy, Tensor(1, 32, 32), w), ShapeError);
}

TEST_CASE("sam_forward") {
    ParamStore store;
    SamParams p{ConvLayer::create(store, "img", ConvSpec::standard(4, 3)),
                ConvLayer::create(store, "mask", ConvSpec::standard(3, 4)),
                ConvLayer::create(store, "feat", ConvSpec::standard(4, 4))};
    CounterRng rng(3);
    p.to_mask.init(rng);
    const Tensor feat = random_tensor({4, 8, 8}, 164), img = random_tensor({3, 8, 8}, 165);
    SamOutput zero = sam_forward(ag::constant(feat), ag::constant(img), p, nullptr);
    CHECK(identical(zero.restored.value(), img));
    CHECK(identical(zero.bridged.value(), feat));

    p.to_image.init(rng);
    p.features.init(rng);
    // Zero mask weights leave sigmoid(0) = 0.5 as the gate.
    p.to_mask.zero();
    SamOutput half = sam_forward(ag::constant(feat), ag::constant(img), p, nullptr);
    const Tensor conv_feat = p.features(ag::constant(feat), nullptr).value();
    CHECK(max_abs_diff(half.bridged.value(), feat + conv_feat * 0.5) < 1e-15);
    CHECK(half.restored.shape() == Shape{3, 8, 8});
    CHECK_THROWS_AS(sam_forward(ag::constant(feat), ag::constant(Tensor(3, 4, 4)), p, nullptr), ShapeError);
}

TEST_CASE("parameter counts") {
    ModelConfig full, light;
    full.base_channels = 64;
    light.base_channels = 36;
    const double ratio = double(param_count(full)) / double(param_count(light));
    CHECK(param_count(light) < param_count(full));
    CHECK(ratio >= 2.5);
    CHECK(ratio <= 3.5);

    ModelConfig tiny;
    tiny.base_channels = 4;
    tiny.patch_height = tiny.patch_width = 16;
    ModelWeights w(tiny);
    w.init(4);
    std::size_t walked = 0;
    std::vector<std::string> names;
    for (const StoredTensor& t : list_checkpoint_tensors(serialize_checkpoint(w))) {
        std::size_t n = 1;
        for (int d : t.dims) n *= static_cast<std::size_t>(d);
        CHECK(n == t.numel);
        walked += n;
        names.push_back(t.name);
    }
    CHECK(walked == param_count(tiny));
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
}

TEST_CASE("model config validation") {
    ModelConfig c;
    c.base_channels = 2;
    CHECK_THROWS(c.validate());
    c = ModelConfig{};
    c.patch_height = 30;
    CHECK_THROWS(c.validate());
    c = ModelConfig{};
    c.k_filters = 0;
    CHECK_THROWS(ModelWeights{c});
}

TEST_CASE("network gradients match finite differences") {
    const auto results = run_gradcheck_suite("network", 11);
    REQUIRE(results.size() == 1);
    CHECK(results[0].report.passed());
    // Every learnable tensor of the network is covered.
    ModelWeights w(gradcheck_network_config());
    std::size_t covered = 0;
    for (const auto& e : results[0].report.entries) covered += e.name.rfind("loss.", 0) != 0;
    CHECK(covered == w.params().size());
}
