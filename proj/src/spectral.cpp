#include "fcenet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace fcenet {

Spectrum::Spectrum(Shape shape, std::vector<Complex> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.numel()) {
        throw ShapeError("spectrum data length does not match shape " + to_string(shape));
    }
}

Spectrum& Spectrum::operator+=(const Spectrum& o) {
    if (o.shape_ != shape_) throw ShapeError("Spectrum +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Spectrum& Spectrum::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

FilterTensor::FilterTensor(int channels_, int height_, int width_, double fill)
    : channels(channels_), height(height_), width(width_),
      gains(static_cast<std::size_t>(channels_) * height_ * width_, fill) {}

FilterTensor FilterTensor::from_tensor(const Tensor& t) {
    FilterTensor f(t.channels(), t.height(), t.width());
    std::ranges::copy(t.data(), f.gains.begin());
    return f;
}

Tensor FilterTensor::to_tensor() const { return Tensor(Shape{channels, height, width}, gains); }

bool FilterTensor::all_finite() const {
    return std::ranges::all_of(gains, [](double g) { return std::isfinite(g); });
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// Twiddles exp(-2πi k/N) for k < N/2, cached per length.
const std::vector<Complex>& twiddles(int n) {
    thread_local std::map<int, std::vector<Complex>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<Complex> tw(n / 2);
    for (int k = 0; k < n / 2; ++k) {
        const double a = -2.0 * std::numbers::pi * k / n;
        tw[k] = {std::cos(a), std::sin(a)};
    }
    return cache.emplace(n, std::move(tw)).first->second;
}

void fft_radix2(std::span<Complex> a, bool inverse) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto& tw = twiddles(n);
    const double sign = inverse ? -1.0 : 1.0;
    // Plain arithmetic: std::complex operator* carries NaN recovery paths.
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        const int step = n / len;
        for (int i = 0; i < n; i += len) {
            for (int k = 0; k < half; ++k) {
                const double wr = tw[k * step].real();
                const double wi = sign * tw[k * step].imag();
                const Complex u = a[i + k];
                const Complex v = a[i + k + half];
                const double tr = wr * v.real() - wi * v.imag();
                const double ti = wr * v.imag() + wi * v.real();
                a[i + k] = {u.real() + tr, u.imag() + ti};
                a[i + k + half] = {u.real() - tr, u.imag() - ti};
            }
        }
    }
}

// Column transform of a power-of-two H×W plane: butterflies run across whole
// rows so the inner loop is contiguous.
void fft_columns_radix2(Complex* plane, int H, int W, bool inverse) {
    const std::size_t w = static_cast<std::size_t>(W);
    for (int i = 1, j = 0; i < H; ++i) {
        int bit = H >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap_ranges(plane + i * w, plane + (i + 1) * w, plane + j * w);
    }
    const auto& tw = twiddles(H);
    const double sign = inverse ? -1.0 : 1.0;
    for (int len = 2; len <= H; len <<= 1) {
        const int half = len / 2;
        const int step = H / len;
        for (int i = 0; i < H; i += len) {
            for (int k = 0; k < half; ++k) {
                const double wr = tw[k * step].real();
                const double wi = sign * tw[k * step].imag();
                double* u = reinterpret_cast<double*>(plane + (i + k) * w);
                double* v = reinterpret_cast<double*>(plane + (i + k + half) * w);
                for (std::size_t x = 0; x < 2 * w; x += 2) {
                    const double tr = wr * v[x] - wi * v[x + 1];
                    const double ti = wr * v[x + 1] + wi * v[x];
                    v[x] = u[x] - tr;
                    v[x + 1] = u[x + 1] - ti;
                    u[x] += tr;
                    u[x + 1] += ti;
                }
            }
        }
    }
}

template <class Transform1D>
void transform2d(Spectrum& s, bool inverse, Transform1D&& tf) {
    const int H = s.height();
    const int W = s.width();
    const bool radix2 = &tf == &fft1d;
    const bool fast_columns = radix2 && is_power_of_two(H);
    const bool fast_rows = radix2 && is_power_of_two(W);
    std::vector<Complex> column(H);
    std::vector<Complex> transposed(fast_rows ? s.shape().plane() : 0);
    for (int c = 0; c < s.channels(); ++c) {
        auto plane = s.channel(c);
        if (fast_rows) {
            // Rows become columns of the W×H transpose.
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) transposed[static_cast<std::size_t>(x) * H + y] = plane[static_cast<std::size_t>(y) * W + x];
            fft_columns_radix2(transposed.data(), W, H, inverse);
            for (int x = 0; x < W; ++x)
                for (int y = 0; y < H; ++y) plane[static_cast<std::size_t>(y) * W + x] = transposed[static_cast<std::size_t>(x) * H + y];
        } else {
            for (int y = 0; y < H; ++y) tf(plane.subspan(static_cast<std::size_t>(y) * W, W), inverse);
        }
        if (fast_columns) {
            fft_columns_radix2(plane.data(), H, W, inverse);
            continue;
        }
        for (int x = 0; x < W; ++x) {
            for (int y = 0; y < H; ++y) column[y] = plane[static_cast<std::size_t>(y) * W + x];
            tf(std::span<Complex>(column), inverse);
            for (int y = 0; y < H; ++y) plane[static_cast<std::size_t>(y) * W + x] = column[y];
        }
    }
}

Spectrum to_complex(const Tensor& t) {
    Spectrum s(t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = t[i];
    return s;
}

}  // namespace

void dft1d_direct(std::span<Complex> data, bool inverse) {
    const int n = static_cast<int>(data.size());
    std::vector<Complex> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        Complex acc = 0.0;
        for (int j = 0; j < n; ++j) {
            // Reduce the phase index first so large products stay exact.
            const long long idx = (static_cast<long long>(k) * j) % n;
            const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(idx) / n;
            acc += data[j] * Complex(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    std::ranges::copy(out, data.begin());
}

void fft1d(std::span<Complex> data, bool inverse) {
    if (data.size() <= 1) return;
    if (is_power_of_two(static_cast<int>(data.size()))) {
        fft_radix2(data, inverse);
    } else {
        dft1d_direct(data, inverse);
    }
}

Spectrum dft2d(const Tensor& input) {
    Spectrum s = to_complex(input);
    transform2d(s, false, fft1d);
    return s;
}

Spectrum dft2d(const Spectrum& input) {
    Spectrum s = input;
    transform2d(s, false, fft1d);
    return s;
}

Spectrum dft2d_direct(const Tensor& input) {
    Spectrum s = to_complex(input);
    transform2d(s, false, dft1d_direct);
    return s;
}

Spectrum idft2d_complex(const Spectrum& input) {
    Spectrum s = input;
    transform2d(s, true, fft1d);
    const double norm = 1.0 / static_cast<double>(s.shape().plane());
    s *= norm;
    return s;
}

Tensor real_part(const Spectrum& s, InverseDiagnostics* diagnostics) {
    Tensor out(s.shape());
    double max_imag = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = s[i].real();
        max_imag = std::max(max_imag, std::abs(s[i].imag()));
        sum_sq += s[i].imag() * s[i].imag();
    }
    if (diagnostics != nullptr) {
        diagnostics->max_abs_imag = max_imag;
        diagnostics->rms_imag = s.size() ? std::sqrt(sum_sq / static_cast<double>(s.size())) : 0.0;
    }
    return out;
}

Tensor idft2d(const Spectrum& input, InverseDiagnostics* diagnostics) {
    return real_part(idft2d_complex(input), diagnostics);
}

Spectrum apply_filter(const Spectrum& spec, const FilterTensor& filt) {
    if (filt.height != spec.height() || filt.width != spec.width()) {
        throw ShapeError("apply_filter: filter " + std::to_string(filt.height) + "x" +
                         std::to_string(filt.width) + " does not match spectrum " +
                         to_string(spec.shape()));
    }
    if (filt.channels != 1 && filt.channels != spec.channels()) {
        throw ShapeError("apply_filter: filter channel count must be 1 or match the spectrum");
    }
    Spectrum out(spec.shape());
    const std::size_t plane = spec.shape().plane();
    for (int c = 0; c < spec.channels(); ++c) {
        const double* g = filt.gains.data() + (filt.channels == 1 ? 0 : c * plane);
        auto src = spec.channel(c);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * g[i];
    }
    return out;
}

double radial_frequency(int u, int v, int height, int width) {
    // Signed centered frequencies: bins above N/2 wrap to negative.
    const double fu = u <= height / 2 ? u : u - height;
    const double fv = v <= width / 2 ? v : v - width;
    const double nu = height > 1 ? fu / (height / 2.0) : 0.0;
    const double nv = width > 1 ? fv / (width / 2.0) : 0.0;
    return std::sqrt(nu * nu + nv * nv) / std::numbers::sqrt2;
}

FilterTensor ideal_high_pass(int height, int width, double cutoff) {
    if (!(cutoff >= 0.0 && cutoff <= 1.0)) {
        throw std::invalid_argument("ideal_high_pass: cutoff must lie in [0, 1]");
    }
    FilterTensor f(1, height, width);
    for (int u = 0; u < height; ++u) {
        for (int v = 0; v < width; ++v) {
            f.gains[static_cast<std::size_t>(u) * width + v] =
                radial_frequency(u, v, height, width) <= cutoff ? 0.0 : 1.0;
        }
    }
    return f;
}

FilterTensor ideal_low_pass(int height, int width, double cutoff) {
    FilterTensor f = ideal_high_pass(height, width, cutoff);
    for (auto& g : f.gains) g = 1.0 - g;
    return f;
}

}  // namespace fcenet
