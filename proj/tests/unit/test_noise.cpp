#include <doctest.h>

#include <cmath>

#include "fcenet/noise.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

namespace {

bool identical(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

bool in_unit_range(const Tensor& t) {
    for (double v : t.data())
        if (v < 0.0 || v > 1.0) return false;
    return true;
}

// Sample variance of one mid-gray pixel over repeated draws.
double pixel_variance(double level, int samples) {
    CounterRng rng(11, 1, static_cast<std::uint64_t>(level));
    const Tensor px(1, 1, 1, 0.5);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double v = mixed_noise(px, level, rng)[0];
        s += v;
        s2 += v * v;
    }
    const double m = s / samples;
    return (s2 - samples * m * m) / (samples - 1);
}

}  // namespace

TEST_CASE("counter rng") {
    CounterRng a(5, 1), b(5, 1), c(5, 2);
    for (int i = 0; i < 10; ++i) {
        const auto va = a(), vb = b();
        CHECK(va == vb);
        CHECK(va != c());
    }
    CounterRng f1 = a.fork(3), f2 = b.fork(3);
    CHECK(f1() == f2());
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform(2.0, 3.0);
        CHECK(u >= 2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("darken") {
    Tensor img = random_tensor({3, 8, 8}, 60, 0.0, 1.0);
    CounterRng rng(1);
    CHECK(identical(darken(img, 1.0, 1.0, rng), img));
    CHECK(max_abs_diff(darken(img, 0.5, 0.5, rng), img * 0.5) == 0.0);
    CounterRng r1(9), r2(9);
    CHECK(identical(darken(img, 0.1, 1.0, r1), darken(img, 0.1, 1.0, r2)));
    CHECK_THROWS(darken(img, 0.0, 0.5, rng));
    CHECK_THROWS(darken(img, 0.6, 0.5, rng));
}

TEST_CASE("mixed noise") {
    CHECK(pixel_variance(1.0, 100) * 2.0 < pixel_variance(16.0, 100));
    const double v1 = pixel_variance(1.0, 1000), v8 = pixel_variance(8.0, 1000), v16 = pixel_variance(16.0, 1000);
    CHECK(v1 < v8);
    CHECK(v8 < v16);

    // Zero signal: clamped read noise only, so about half the pixels clip to 0.
    CounterRng rng(12);
    Tensor dark = mixed_noise(Tensor(1, 64, 64), 16.0, rng);
    CHECK(in_unit_range(dark));
    int zeros = 0;
    double pos = 0.0;
    for (double v : dark.data()) {
        zeros += v == 0.0;
        pos += v;
    }
    CHECK(std::abs(zeros / 4096.0 - 0.5) < 0.05);
    // Mean of a half-normal on the positive side: sigma / sqrt(2 pi).
    CHECK(std::abs(pos / 4096.0 - read_noise_sigma(16.0) / std::sqrt(2 * M_PI)) < 0.1 * read_noise_sigma(16.0));

    Tensor img = random_tensor({3, 16, 16}, 61, 0.0, 1.0);
    CounterRng r1(3), r2(3);
    CHECK(identical(mixed_noise(img, 8.0, r1), mixed_noise(img, 8.0, r2)));
    CHECK_THROWS(mixed_noise(img, 0.5, r1));
    CHECK_THROWS(mixed_noise(img, 17.0, r1));
}

TEST_CASE("gaussian noise") {
    Tensor img = random_tensor({3, 16, 16}, 62, 0.0, 1.0);
    CounterRng rng(4);
    CHECK(identical(gaussian_noise(img, 0.0, rng), img));

    Tensor gray(1, 64, 64, 0.5);
    Tensor noisy = gaussian_noise(gray, 25.0, rng);
    double s = 0, s2 = 0;
    for (double v : noisy.data()) s += v - 0.5, s2 += (v - 0.5) * (v - 0.5);
    const double sd = std::sqrt(s2 / 4096.0 - (s / 4096.0) * (s / 4096.0));
    CHECK(std::abs(sd - 25.0 / 255.0) < 0.15 * 25.0 / 255.0);
    CHECK(in_unit_range(noisy));

    CounterRng r1(5), r2(5);
    CHECK(identical(gaussian_noise(img, 50.0, r1), gaussian_noise(img, 50.0, r2)));
    CHECK_THROWS(gaussian_noise(img, -1.0, rng));
}

TEST_CASE("synth_triple") {
    NoiseSpec spec;
    const SceneTriple a = synth_triple(21, 32, 64, spec);
    const SceneTriple b = synth_triple(21, 32, 64, spec);
    CHECK(identical(a.clean, b.clean));
    CHECK(identical(a.nir, b.nir));
    CHECK(identical(a.noisy, b.noisy));
    CHECK(a.clean.shape() == Shape{3, 32, 64});
    CHECK(a.nir.shape() == Shape{1, 32, 64});
    CHECK(in_unit_range(a.clean));
    CHECK(in_unit_range(a.nir));
    CHECK(in_unit_range(a.noisy));
    CHECK_FALSE(identical(synth_triple(22, 32, 64, spec).clean, a.clean));

    NoiseSpec none;
    none.kind = NoiseKind::gaussian;
    none.sigma = 0.0;
    none.darken = false;
    const SceneTriple c = synth_triple(21, 32, 32, none);
    CHECK(identical(c.noisy, c.clean));

    CHECK_THROWS(synth_triple(1, 48, 32, spec));
    CHECK_THROWS(synth_triple(1, 16, 16, spec));
    NoiseSpec bad;
    bad.level = 20.0;
    CHECK_THROWS(synth_triple(1, 32, 32, bad));
}
