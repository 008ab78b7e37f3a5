#include <doctest.h>

#include <cmath>

#include "fcenet/metrics.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

namespace {

// Sliding-window SSIM written out term by term.
double ssim_oracle(const Tensor& a, const Tensor& b, int win, double sigma, double peak = 1.0) {
    std::vector<double> w(win * win);
    double total = 0.0;
    const double mid = (win - 1) / 2.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            w[y * win + x] = std::exp(-((y - mid) * (y - mid) + (x - mid) * (x - mid)) / (2 * sigma * sigma));
            total += w[y * win + x];
        }
    for (double& v : w) v /= total;
    const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
    double acc = 0.0;
    int count = 0;
    for (int c = 0; c < a.channels(); ++c)
        for (int y0 = 0; y0 + win <= a.height(); ++y0)
            for (int x0 = 0; x0 + win <= a.width(); ++x0) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = 0; y < win; ++y)
                    for (int x = 0; x < win; ++x) {
                        const double wt = w[y * win + x];
                        const double pa = a(c, y0 + y, x0 + x), pb = b(c, y0 + y, x0 + x);
                        ma += wt * pa;
                        mb += wt * pb;
                        saa += wt * pa * pa;
                        sbb += wt * pb * pb;
                        sab += wt * pa * pb;
                    }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    return acc / count;
}

}  // namespace

TEST_CASE("psnr") {
    Tensor a = random_tensor({3, 16, 16}, 40, 0.0, 1.0);
    CHECK(psnr(a, a) == kPsnrCap);
    Tensor shifted = a;
    for (double& v : shifted.data()) v += 1.0 / 255.0;
    CHECK(std::abs(psnr(a, shifted) - 48.131) < 1e-3);

    Tensor b = random_tensor({3, 16, 16}, 41, 0.0, 1.0);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.size());
    CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-9);
    CHECK(std::abs(psnr(a, b) - psnr(b, a)) < 1e-12);
    CHECK_THROWS_AS(psnr(a, Tensor(3, 16, 8)), ShapeError);

    Tensor base(3, 32, 32, 0.5);
    double prev = 1e9;
    for (double sd : {0.01, 0.02, 0.05}) {
        CounterRng rng(7);
        Tensor noisy = base;
        for (double& v : noisy.data()) v += rng.normal(0.0, sd);
        const double p = psnr(base, noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim") {
    Tensor a = random_tensor({3, 24, 24}, 42, 0.0, 1.0);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);

    Tensor flat(1, 16, 16, 0.2), lifted(1, 16, 16, 0.9);
    const double lum = ssim(flat, lifted);
    CHECK(lum < 1.0);
    // Zero variance leaves only the luminance term.
    const double c1 = 1e-4;
    CHECK(std::abs(lum - (2 * 0.2 * 0.9 + c1) / (0.04 + 0.81 + c1)) < 1e-12);

    Tensor x = random_tensor({1, 8, 8}, 43, 0.0, 1.0);
    Tensor y = random_tensor({1, 8, 8}, 44, 0.0, 1.0);
    SsimParams p;
    p.window = 3;
    CHECK(std::abs(ssim(x, y, p) - ssim_oracle(x, y, 3, 1.5)) < 1e-9);

    Tensor s1 = random_tensor({2, 20, 20}, 45, -0.5, 0.5);
    Tensor s2 = random_tensor({2, 20, 20}, 46, -0.5, 0.5);
    CHECK(std::abs(ssim(s1, s2) - ssim_oracle(s1, s2, 11, 1.5)) < 1e-9);
    CHECK(std::abs(ssim(s1, s2) - ssim(s2, s1)) < 1e-12);
    CHECK(std::abs(ssim(s1, s1 * -1.0)) <= 1.0);

    CHECK_THROWS_AS(ssim(Tensor(1, 8, 8), Tensor(1, 8, 8)), ShapeError);
    CHECK_THROWS_AS(ssim(x, Tensor(1, 8, 4), p), ShapeError);
    p.window = 4;
    CHECK_THROWS(ssim(x, y, p));
}
