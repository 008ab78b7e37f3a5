#pragma once

#include <cstdint>
#include <limits>
#include <utility>

#include "fcenet/tensor.hpp"

namespace fcenet {

// Counter-based generator: output i is a SplitMix64 finalizer applied to
// key + i·γ. Keys derive from (seed, stream ids), so every stream is
// independent of the order in which other streams are consumed.
class CounterRng {
   public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    // Independent child stream keyed by id.
    CounterRng fork(std::uint64_t id) const;

    double uniform(double lo = 0.0, double hi = 1.0);
    double normal(double mean = 0.0, double stddev = 1.0);
    std::uint64_t poisson(double mean);

   private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id);

enum class NoiseKind { mixed_gp, gaussian };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::mixed_gp;
    double sigma = 25.0;  // 8-bit units, gaussian kind
    double level = 8.0;   // [1, 16], mixed_gp kind
    bool darken = true;
    double darken_lo = 0.1;
    double darken_hi = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr double kMinNoiseLevel = 1.0;
inline constexpr double kMaxNoiseLevel = 16.0;

// Shot-noise scale (photons per unit intensity) and read-noise std for a
// mixed Gaussian-Poisson level.
double shot_scale(double level);
double read_noise_sigma(double level);

Tensor clamp01(Tensor t);

// Multiplies every pixel by one scale drawn from U(lo, hi), then clamps.
Tensor darken(const Tensor& image, double lo, double hi, CounterRng& rng);
Tensor mixed_noise(const Tensor& image, double level, CounterRng& rng);
Tensor gaussian_noise(const Tensor& image, double sigma, CounterRng& rng);
// Noise only (no darkening) per spec.kind.
Tensor add_noise(const Tensor& image, const NoiseSpec& spec, CounterRng& rng);

struct SceneTriple {
    Tensor clean;  // 3×H×W
    Tensor nir;    // 1×H×W
    Tensor noisy;  // 3×H×W
    std::uint64_t seed = 0;
};

// Procedural scene: smooth color fields plus shared edges and textures. The
// NIR frame keeps the shared structure but swaps in its own low-frequency
// intensity field. Darkening (when enabled) scales the clean scene before
// noise is added, so `clean` is the darkened ground truth.
SceneTriple synth_triple(std::uint64_t seed, int height, int width, const NoiseSpec& spec);

}  // namespace fcenet
