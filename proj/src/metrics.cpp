#include "fcenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fcenet {

double psnr(const Tensor& a, const Tensor& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

void SsimParams::validate() const {
    if (window < 3 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 3");
    if (!(sigma > 0.0)) throw std::invalid_argument("ssim: sigma must be positive");
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw std::invalid_argument("ssim: k1 and k2 must be positive");
    if (!(peak > 0.0)) throw std::invalid_argument("ssim: peak must be positive");
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const int half = size / 2;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (auto& v : w) v /= total;
    return w;
}

// Valid-mode separable filtering of one H×W plane.
std::vector<double> filter_valid(const double* src, int H, int W, const std::vector<double>& w) {
    const int k = static_cast<int>(w.size());
    const int oh = H - k + 1;
    const int ow = W - k + 1;
    std::vector<double> rows(static_cast<std::size_t>(H) * ow, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += w[j] * src[static_cast<std::size_t>(y) * W + x + j];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += w[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    params.validate();
    const int H = a.height();
    const int W = a.width();
    if (H < params.window || W < params.window) {
        throw ShapeError("ssim: image " + to_string(a.shape()) + " smaller than window " +
                         std::to_string(params.window));
    }
    const double c1 = (params.k1 * params.peak) * (params.k1 * params.peak);
    const double c2 = (params.k2 * params.peak) * (params.k2 * params.peak);
    const auto w = gaussian_window(params.window, params.sigma);
    const std::size_t plane = a.shape().plane();
    std::vector<double> aa(plane), bb(plane), ab(plane);

    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        auto ac = a.channel(c);
        auto bc = b.channel(c);
        for (std::size_t i = 0; i < plane; ++i) {
            aa[i] = ac[i] * ac[i];
            bb[i] = bc[i] * bc[i];
            ab[i] = ac[i] * bc[i];
        }
        const auto mu_a = filter_valid(ac.data(), H, W, w);
        const auto mu_b = filter_valid(bc.data(), H, W, w);
        const auto e_aa = filter_valid(aa.data(), H, W, w);
        const auto e_bb = filter_valid(bb.data(), H, W, w);
        const auto e_ab = filter_valid(ab.data(), H, W, w);
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
            const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
            const double cov = e_ab[i] - mu_a[i] * mu_b[i];
            const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
            const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace fcenet
