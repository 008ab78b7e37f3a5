#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fcenet/tensor.hpp"

namespace fcenet {

using Complex = std::complex<double>;

// Full complex C×H×W spectrum, row-major, DC at (0, 0).
class Spectrum {
   public:
    Spectrum() = default;
    explicit Spectrum(Shape shape) : shape_(shape), data_(shape.numel()) {}
    Spectrum(Shape shape, std::vector<Complex> data);

    static Spectrum zeros_like(const Spectrum& s) { return Spectrum(s.shape_); }

    const Shape& shape() const { return shape_; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Complex& operator()(int c, int u, int v) { return data_[index(c, u, v)]; }
    Complex operator()(int c, int u, int v) const { return data_[index(c, u, v)]; }
    Complex& operator[](std::size_t i) { return data_[i]; }
    Complex operator[](std::size_t i) const { return data_[i]; }
    std::span<Complex> data() { return data_; }
    std::span<const Complex> data() const { return data_; }
    std::span<Complex> channel(int c) { return {data_.data() + c * shape_.plane(), shape_.plane()}; }
    std::span<const Complex> channel(int c) const {
        return {data_.data() + c * shape_.plane(), shape_.plane()};
    }

    Spectrum& operator+=(const Spectrum& o);
    Spectrum& operator*=(double s);

   private:
    std::size_t index(int c, int u, int v) const {
        return (static_cast<std::size_t>(c) * shape_.height + u) * shape_.width + v;
    }

    Shape shape_;
    std::vector<Complex> data_;
};

// Real per-bin gains. channels == 1 broadcasts over every spectrum channel.
struct FilterTensor {
    int channels = 1;
    int height = 0;
    int width = 0;
    std::vector<double> gains;

    FilterTensor() = default;
    FilterTensor(int channels, int height, int width, double fill = 0.0);
    static FilterTensor from_tensor(const Tensor& t);
    Tensor to_tensor() const;
    bool all_finite() const;
};

bool is_power_of_two(int n);

// In-place 1D transform: exp(-2πi·kn/N) when inverse is false, exp(+2πi·kn/N)
// otherwise. No normalization. Radix-2 for power-of-two lengths, direct sum
// for everything else.
void fft1d(std::span<Complex> data, bool inverse);
void dft1d_direct(std::span<Complex> data, bool inverse);

// Unnormalized forward 2D DFT per channel.
Spectrum dft2d(const Tensor& input);
Spectrum dft2d(const Spectrum& input);
// Direct O(N²) separable transform, used to cross-check the FFT path.
Spectrum dft2d_direct(const Tensor& input);

// Inverse DFT with 1/(H·W) normalization, full complex result.
Spectrum idft2d_complex(const Spectrum& input);

struct InverseDiagnostics {
    double max_abs_imag = 0.0;
    double rms_imag = 0.0;
};

// Inverse DFT returning the real part. For non-Hermitian spectra the dropped
// imaginary residue is reported through diagnostics when provided.
Tensor idft2d(const Spectrum& input, InverseDiagnostics* diagnostics = nullptr);
Tensor real_part(const Spectrum& s, InverseDiagnostics* diagnostics = nullptr);

Spectrum apply_filter(const Spectrum& spec, const FilterTensor& filt);

// Normalized radial frequency in [0, 1] for bin (u, v) of an H×W spectrum.
double radial_frequency(int u, int v, int height, int width);

// Gain 0 where radial_frequency <= cutoff, 1 elsewhere.
FilterTensor ideal_high_pass(int height, int width, double cutoff);
// Bit-complement of ideal_high_pass.
FilterTensor ideal_low_pass(int height, int width, double cutoff);

}  // namespace fcenet
