#pragma once

// Flat key=value run configuration. Blank lines and lines starting with '#'
// are ignored; unknown keys and malformed values are errors.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcenet/noise.hpp"
#include "fcenet/training.hpp"

namespace fcenet {

class ConfigError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    int base_channels = 8;
    int blocks_per_scale = 2;
    int k_filters = 4;
    double loss_eps = 1e-3;
    double freq_weight = 0.1;
    double lr_init = 2e-4;
    double lr_min = 1e-6;
    long steps = 500;
    int batch = 8;
    int log_every = 10;
    double clip_norm = 1.0;
    std::uint64_t data_seed = 0;
    int data_size = 64;
    int data_count = 8;
    NoiseKind noise_kind = NoiseKind::mixed_gp;
    double noise_level = 8.0;
    double noise_sigma = 25.0;
    bool noise_darken = true;
    double darken_lo = 0.1;
    double darken_hi = 1.0;

    ModelConfig model() const;
    TrainConfig train(std::uint64_t seed) const;
    NoiseSpec noise(std::uint64_t seed) const;
    void validate() const;
};

// Synthetic training triples i = 0..data.count-1, seeded by derive_seed(data.seed, i).
std::vector<SceneTriple> synthetic_triples(const RunConfig& cfg);
// Separate triple whose PSNR is logged during training.
SceneTriple held_out_triple(const RunConfig& cfg);

// Every accepted key, in documentation order.
const std::vector<std::string>& run_config_keys();

RunConfig parse_run_config(const std::string& text);
// Missing files raise IoError; bad contents raise ConfigError.
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

}  // namespace fcenet
