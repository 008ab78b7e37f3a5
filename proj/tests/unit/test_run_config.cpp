#include <doctest.h>

#include <filesystem>

#include "fcenet/file_util.hpp"
#include "fcenet/run_config.hpp"

using namespace fcenet;

TEST_CASE("defaults") {
    const RunConfig c = parse_run_config("");
    CHECK(c.base_channels == 8);
    CHECK(c.lr_init == 2e-4);
    CHECK(c.lr_min == 1e-6);
    CHECK(c.steps == 500);
    CHECK(c.freq_weight == 0.1);
    CHECK(c.loss_eps == 1e-3);
    CHECK(c.noise_kind == NoiseKind::mixed_gp);
    CHECK(c.noise_level == 8.0);
    CHECK(c.darken_lo == 0.1);
    CHECK(c.darken_hi == 1.0);
    CHECK(c.model() == ModelConfig{});
}

TEST_CASE("parsing") {
    const RunConfig c = parse_run_config(
        "# comment\n"
        "\n"
        "model.base_channels = 16\n"
        "optim.steps=25\r\n"
        "noise.kind=gaussian\n"
        "noise.sigma=50\n"
        "noise.darken=off\n"
        "data.seed=18446744073709551615\n"
        "data.size=128\n");
    CHECK(c.base_channels == 16);
    CHECK(c.steps == 25);
    CHECK(c.noise_kind == NoiseKind::gaussian);
    CHECK(c.noise_sigma == 50.0);
    CHECK_FALSE(c.noise_darken);
    CHECK(c.data_seed == 18446744073709551615ULL);
    CHECK(c.model().patch_height == 128);

    const NoiseSpec ns = c.noise(4);
    CHECK(ns.kind == NoiseKind::gaussian);
    CHECK(ns.seed == 4);
    const TrainConfig tc = c.train(3);
    CHECK(tc.steps == 25);
    CHECK(tc.seed == 3);
}

TEST_CASE("every documented key is accepted") {
    const auto& keys = run_config_keys();
    for (const char* k : {"model.base_channels", "model.blocks_per_scale", "model.k_filters", "loss.eps",
                          "loss.freq_weight", "optim.lr_init", "optim.lr_min", "optim.steps", "optim.batch",
                          "data.seed", "data.size", "noise.kind", "noise.level", "noise.sigma", "noise.darken_lo",
                          "noise.darken_hi"}) {
        CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
    }
}

TEST_CASE("format and parse agree") {
    RunConfig c;
    c.lr_init = 3.5e-4;
    c.noise_kind = NoiseKind::gaussian;
    c.darken_lo = 0.25;
    c.steps = 77;
    const RunConfig back = parse_run_config(format_run_config(c));
    CHECK(format_run_config(back) == format_run_config(c));
    CHECK(back.lr_init == 3.5e-4);
    CHECK(back.steps == 77);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(parse_run_config("model.depth=3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("optim.steps=ten\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("optim.steps\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("optim.steps=1\noptim.steps=2\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("noise.kind=poisson\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("noise.level=20\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("data.size=48\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("optim.lr_min=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("noise.darken_lo=0.9\nnoise.darken_hi=0.5\n"), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), IoError);
    try {
        load_run_config("/nonexistent/run.cfg");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/run.cfg") != std::string::npos);
    }
}

TEST_CASE("loading from disk") {
    const auto path = std::filesystem::temp_directory_path() / "fcenet_run.cfg";
    write_file_atomic(path, "optim.batch=2\n");
    CHECK(load_run_config(path.string()).batch == 2);
    std::filesystem::remove(path);
}
