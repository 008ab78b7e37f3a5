#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fcenet/spectral.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

namespace {

double max_abs(const Spectrum& a, const Spectrum& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("dft2d of simple inputs") {
    Spectrum s = dft2d(Tensor(1, 8, 4, 0.7));
    CHECK(std::abs(s(0, 0, 0) - Complex(0.7 * 32, 0)) < 1e-10);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(std::abs(s[i]) < 1e-10);

    Tensor x(1, 2, 2);
    x.storage() = {1, 2, 3, 4};
    Spectrum t = dft2d(x);
    // X[u,v] = sum over the four pixels with signs (-1)^(uy+vx).
    const Complex expect[4] = {10.0, -2.0, -4.0, 0.0};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(t[i] - expect[i]) < 1e-12);
}

TEST_CASE("FFT agrees with the direct transform") {
    for (Shape s : {Shape{2, 16, 8}, Shape{1, 6, 10}, Shape{3, 5, 7}}) {
        Tensor x = random_tensor(s, 30);
        CHECK(max_abs(dft2d(x), dft2d_direct(x)) < 1e-9);
    }
    // Brute-force definition on a non power of two.
    Tensor x = random_tensor({1, 3, 5}, 31);
    Spectrum s = dft2d(x);
    double worst = 0.0;
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 5; ++v) {
            Complex acc = 0.0;
            for (int y = 0; y < 3; ++y)
                for (int xx = 0; xx < 5; ++xx)
                    acc += x(0, y, xx) * std::polar(1.0, -2.0 * std::numbers::pi * (u * y / 3.0 + v * xx / 5.0));
            worst = std::max(worst, std::abs(acc - s(0, u, v)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("idft2d") {
    Tensor zero = idft2d(Spectrum(Shape{1, 4, 4}));
    for (double v : zero.data()) CHECK(v == 0.0);
    Spectrum dc(Shape{1, 4, 8});
    dc(0, 0, 0) = 32.0;
    const Tensor ones = idft2d(dc);
    for (double v : ones.data()) CHECK(std::abs(v - 1.0) < 1e-12);

    Tensor x = random_tensor({3, 128, 128}, 32);
    CHECK(max_abs_diff(idft2d(dft2d(x)), x) < 1e-10);
    Tensor odd = random_tensor({2, 12, 9}, 33);
    CHECK(max_abs_diff(idft2d(dft2d(odd)), odd) < 1e-10);

    Tensor y = random_tensor({1, 64, 64}, 34);
    Spectrum sy = dft2d(y);
    double ex = 0.0, es = 0.0;
    for (double v : y.data()) ex += v * v;
    for (Complex c : sy.data()) es += std::norm(c);
    CHECK(std::abs(ex - es / (64.0 * 64.0)) / ex < 1e-10);

    // Non-Hermitian input: the dropped imaginary part is reported.
    Spectrum nh(Shape{1, 4, 4});
    nh(0, 0, 1) = 16.0;
    InverseDiagnostics diag;
    idft2d(nh, &diag);
    CHECK(diag.max_abs_imag == doctest::Approx(1.0));
}

TEST_CASE("spectrum properties") {
    Tensor x = random_tensor({2, 16, 12}, 35);
    Spectrum s = dft2d(x);
    double worst = 0.0;
    for (int c = 0; c < 2; ++c)
        for (int u = 0; u < 16; ++u)
            for (int v = 0; v < 12; ++v)
                worst = std::max(worst, std::abs(s(c, u, v) - std::conj(s(c, (16 - u) % 16, (12 - v) % 12))));
    CHECK(worst < 1e-9);

    Tensor y = random_tensor({2, 16, 12}, 36);
    Spectrum lhs = dft2d(x * 2.5 + y);
    Spectrum rhs = dft2d(x);
    rhs *= 2.5;
    rhs += dft2d(y);
    CHECK(max_abs(lhs, rhs) < 1e-10);
}

TEST_CASE("apply_filter") {
    Tensor x = random_tensor({2, 8, 8}, 37);
    Spectrum s = dft2d(x);
    CHECK(max_abs(apply_filter(s, FilterTensor(1, 8, 8, 1.0)), s) == 0.0);
    const Spectrum blocked = apply_filter(s, FilterTensor(1, 8, 8, 0.0));
    for (Complex c : blocked.data()) CHECK(c == Complex(0.0));
    CHECK(max_abs_diff(idft2d(apply_filter(s, FilterTensor(1, 8, 8, 0.5))), x * 0.5) < 1e-10);
    CHECK_THROWS_AS(apply_filter(s, FilterTensor(1, 4, 8, 1.0)), ShapeError);
    CHECK_THROWS_AS(apply_filter(s, FilterTensor(3, 8, 8, 1.0)), ShapeError);
}

TEST_CASE("ideal high-pass masks") {
    FilterTensor all = ideal_high_pass(8, 8, 0.0);
    CHECK(all.gains[0] == 0.0);
    for (std::size_t i = 1; i < all.gains.size(); ++i) CHECK(all.gains[i] == 1.0);
    for (double g : ideal_high_pass(8, 8, 1.0).gains) CHECK(g == 0.0);

    // Enumerate bins with centered coordinates, independent of the library helper.
    int blocked = 0;
    for (int u = -4; u < 4; ++u)
        for (int v = -4; v < 4; ++v)
            if (std::sqrt(u * u / 16.0 + v * v / 16.0) / std::sqrt(2.0) <= 0.5) ++blocked;
    FilterTensor half = ideal_high_pass(8, 8, 0.5);
    int zeros = 0;
    for (double g : half.gains) zeros += g == 0.0;
    CHECK(zeros == blocked);

    FilterTensor low = ideal_low_pass(16, 8, 0.3);
    FilterTensor high = ideal_high_pass(16, 8, 0.3);
    for (std::size_t i = 0; i < low.gains.size(); ++i) CHECK(low.gains[i] + high.gains[i] == 1.0);

    CHECK_THROWS(ideal_high_pass(8, 8, -0.1));
    CHECK_THROWS(ideal_high_pass(8, 8, 1.5));
}
