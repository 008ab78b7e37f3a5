#include "fcenet/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fcenet/spectral.hpp"

namespace fcenet {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream ids used by synth_triple.
enum : std::uint64_t {
    kStreamStructure = 1,
    kStreamColor = 2,
    kStreamNir = 3,
    kStreamDarken = 4,
    kStreamNoise = 5,
};

constexpr double kLeafContrast = 0.5;
constexpr double kGratingLo = 0.08;
constexpr double kGratingHi = 0.16;

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id) {
    return splitmix(splitmix(seed + kGamma) ^ (id * 0xd1b54a32d192ed03ULL + kGamma));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    : key_(derive_seed(derive_seed(seed, stream), substream)) {}

CounterRng::result_type CounterRng::operator()() { return splitmix(key_ + (++counter_) * kGamma); }

CounterRng CounterRng::fork(std::uint64_t id) const {
    CounterRng child(0);
    child.key_ = derive_seed(key_, id);
    return child;
}

double CounterRng::uniform(double lo, double hi) {
    // 53 random mantissa bits.
    const double u = static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

double CounterRng::normal(double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    return d(*this);
}

std::uint64_t CounterRng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(*this);
}

void NoiseSpec::validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("noise: sigma must be non-negative");
    if (!(level >= kMinNoiseLevel && level <= kMaxNoiseLevel)) {
        throw std::invalid_argument("noise: level must lie in [1, 16]");
    }
    if (!(darken_lo > 0.0 && darken_lo <= darken_hi && darken_hi <= 1.0)) {
        throw std::invalid_argument("noise: darken range must satisfy 0 < lo <= hi <= 1");
    }
}

double shot_scale(double level) { return 3000.0 / level; }
double read_noise_sigma(double level) { return level / 255.0; }

Tensor clamp01(Tensor t) {
    for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
    return t;
}

Tensor darken(const Tensor& image, double lo, double hi, CounterRng& rng) {
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
        throw std::invalid_argument("darken: range must satisfy 0 < lo <= hi <= 1");
    }
    const double s = lo == hi ? lo : rng.uniform(lo, hi);
    return clamp01(image * s);
}

Tensor mixed_noise(const Tensor& image, double level, CounterRng& rng) {
    if (!(level >= kMinNoiseLevel && level <= kMaxNoiseLevel)) {
        throw std::invalid_argument("mixed_noise: level must lie in [1, 16]");
    }
    const double s = shot_scale(level);
    const double sg = read_noise_sigma(level);
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double x = std::max(image[i], 0.0);
        const double shot = static_cast<double>(rng.poisson(x * s)) / s;
        out[i] = shot + rng.normal(0.0, sg);
    }
    return clamp01(std::move(out));
}

Tensor gaussian_noise(const Tensor& image, double sigma, CounterRng& rng) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_noise: sigma must be non-negative");
    if (sigma == 0.0) return image;
    const double sd = sigma / 255.0;
    Tensor out(image.shape());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] + rng.normal(0.0, sd);
    return clamp01(std::move(out));
}

Tensor add_noise(const Tensor& image, const NoiseSpec& spec, CounterRng& rng) {
    return spec.kind == NoiseKind::mixed_gp ? mixed_noise(image, spec.level, rng)
                                            : gaussian_noise(image, spec.sigma, rng);
}

namespace {

// Zero-mean, unit-variance random field with amplitude spectrum ∝ 1/f^beta.
Tensor smooth_field(CounterRng& rng, int H, int W, double beta) {
    Spectrum s(Shape{1, H, W});
    for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
            const double fu = u <= H / 2 ? u : u - H;
            const double fv = v <= W / 2 ? v : v - W;
            const double f = std::sqrt(fu * fu + fv * fv);
            const double re = rng.normal();
            const double im = rng.normal();
            if (f == 0.0) continue;
            s(0, u, v) = Complex(re, im) / std::pow(f, beta);
        }
    }
    Tensor field = idft2d(s);
    double mean = 0.0;
    for (double v : field.data()) mean += v;
    mean /= static_cast<double>(field.size());
    double var = 0.0;
    for (double v : field.data()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(field.size()));
    for (double& v : field.data()) v = sd > 0.0 ? (v - mean) / sd : 0.0;
    return field;
}

// Shared luminance structure: an occluding "dead leaves" stack of discs and
// rectangles (sharp edges at many scales) plus patches of fine gratings.
Tensor structure_field(CounterRng& rng, int H, int W) {
    Tensor t(1, H, W);
    const int shapes = 40 + static_cast<int>(rng.uniform(0.0, 40.0));
    for (int s = 0; s < shapes; ++s) {
        const double value = rng.uniform(-kLeafContrast, kLeafContrast);
        const double cy = rng.uniform(0.0, H);
        const double cx = rng.uniform(0.0, W);
        // Size drawn log-uniformly so every scale contributes edges.
        const double size = std::exp(rng.uniform(std::log(0.02), std::log(0.35)));
        const double ry = size * H * rng.uniform(0.6, 1.4);
        const double rx = size * W * rng.uniform(0.6, 1.4);
        const bool disc = rng.uniform() < 0.5;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double dy = (y - cy) / ry;
                const double dx = (x - cx) / rx;
                const bool inside = disc ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
                if (inside) t(0, y, x) = value;
            }
        }
    }
    const int gratings = 2 + static_cast<int>(rng.uniform(0.0, 3.0));
    for (int g = 0; g < gratings; ++g) {
        const double amp = rng.uniform(kGratingLo, kGratingHi);
        const double period = rng.uniform(3.0, 8.0);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double ky = std::sin(theta) * 2.0 * std::numbers::pi / period;
        const double kx = std::cos(theta) * 2.0 * std::numbers::pi / period;
        const double y0 = rng.uniform(0.0, 0.6) * H;
        const double x0 = rng.uniform(0.0, 0.6) * W;
        const double hh = rng.uniform(0.2, 0.4) * H;
        const double ww = rng.uniform(0.2, 0.4) * W;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                if (y < y0 || y > y0 + hh || x < x0 || x > x0 + ww) continue;
                t(0, y, x) += amp * std::sin(ky * y + kx * x + phase);
            }
        }
    }
    double mean = 0.0;
    for (double v : t.data()) mean += v;
    mean /= static_cast<double>(t.size());
    for (double& v : t.data()) v -= mean;
    return t;
}

}  // namespace

SceneTriple synth_triple(std::uint64_t seed, int height, int width, const NoiseSpec& spec) {
    if (!is_power_of_two(height) || !is_power_of_two(width) || height < 32 || width < 32) {
        throw std::invalid_argument("synth_triple: height and width must be powers of two >= 32");
    }
    spec.validate();
    CounterRng structure_rng(seed, kStreamStructure);
    CounterRng color_rng(seed, kStreamColor);
    CounterRng nir_rng(seed, kStreamNir);

    const Tensor structure = structure_field(structure_rng, height, width);
    constexpr double kSmoothness = 2.0;
    constexpr double kFieldAmplitude = 0.12;

    SceneTriple triple;
    triple.seed = seed;
    triple.clean = Tensor(3, height, width);
    const Tensor luminance = smooth_field(color_rng, height, width, kSmoothness);
    for (int c = 0; c < 3; ++c) {
        const Tensor chroma = smooth_field(color_rng, height, width, kSmoothness);
        const double base = color_rng.uniform(0.35, 0.65);
        const double gain = color_rng.uniform(0.7, 1.0);
        auto dst = triple.clean.channel(c);
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = base + kFieldAmplitude * (0.8 * luminance[i] + 0.4 * chroma[i]) + gain * structure[i];
        }
    }
    triple.clean = clamp01(std::move(triple.clean));

    const Tensor nir_field = smooth_field(nir_rng, height, width, kSmoothness);
    const double nir_base = nir_rng.uniform(0.4, 0.6);
    const double nir_gain = nir_rng.uniform(0.9, 1.1);
    triple.nir = Tensor(1, height, width);
    for (std::size_t i = 0; i < triple.nir.size(); ++i) {
        triple.nir[i] = nir_base + kFieldAmplitude * nir_field[i] + nir_gain * structure[i];
    }
    triple.nir = clamp01(std::move(triple.nir));

    if (spec.darken) {
        CounterRng darken_rng(seed, kStreamDarken);
        triple.clean = darken(triple.clean, spec.darken_lo, spec.darken_hi, darken_rng);
    }
    CounterRng noise_rng(seed, kStreamNoise);
    triple.noisy = add_noise(triple.clean, spec, noise_rng);
    return triple;
}

}  // namespace fcenet
