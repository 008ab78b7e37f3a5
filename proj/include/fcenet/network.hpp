#pragma once

// Two-stage denoiser. Stage 1 is a three-scale U-Net over the noisy RGB
// frame whose output passes through SAM; stage 2 runs separate NIR and RGB
// encoders, fuses them with FDSM then FEFM at every encoder scale, and
// decodes a residual on top of the stage-1 estimate.

#include <cstdint>
#include <string>
#include <vector>

#include "fcenet/blocks.hpp"

namespace fcenet {

struct ModelConfig {
    int base_channels = 8;
    int blocks_per_scale = 2;
    int k_filters = 4;
    // Filter banks are sized per scale, so the model is bound to one patch
    // size. Larger images are processed tile by tile.
    int patch_height = 64;
    int patch_width = 64;

    static constexpr int scales = 3;
    static constexpr int in_channels_rgb = 3;
    static constexpr int in_channels_nir = 1;

    void validate() const;
    int channels_at(int scale) const { return base_channels << scale; }
    bool operator==(const ModelConfig&) const = default;
};

struct UnetEncoder {
    ConvLayer stem;
    std::vector<std::vector<ResBlock>> blocks;  // [scale][block]
    std::vector<ConvLayer> down;                // scale s -> s+1
};

struct UnetDecoder {
    std::vector<ConvLayer> up;    // up[s]: channels(s+1) -> channels(s)
    std::vector<ConvLayer> skip;  // pointwise on the encoder feature at scale s
    std::vector<std::vector<ResBlock>> blocks;
};

struct SamParams {
    ConvLayer to_image;   // C -> 3
    ConvLayer to_mask;    // 3 -> C
    ConvLayer features;   // C -> C
};

class ModelWeights {
   public:
    explicit ModelWeights(const ModelConfig& config);
    ModelWeights(ModelWeights&&) = default;
    ModelWeights& operator=(ModelWeights&&) = default;

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // Default initialization from a seed, deterministic.
    void init(std::uint64_t seed);
    // Zeroes the SAM image head and the stage-2 output head.
    void zero_output_heads();

    UnetEncoder s1_enc;
    UnetDecoder s1_dec;
    SamParams sam;
    UnetEncoder nir_enc;
    ConvLayer x1_embed;  // 3 -> C
    ConvLayer merge;     // 2C -> C pointwise
    UnetEncoder rgb_enc;
    std::vector<FdsmParams> fdsm;
    std::vector<FefmParams> fefm;
    UnetDecoder s2_dec;
    ConvLayer head;  // C -> 3

   private:
    ModelConfig config_;
    ParamStore store_;
};

struct SamOutput {
    ag::Var restored;
    ag::Var bridged;
};

SamOutput sam_forward(const ag::Var& features, const ag::Var& input_image, const SamParams& params,
                      GradTape* tape);

struct ForwardOutput {
    ag::Var x1;
    ag::Var x2;
};

// noisy 3×H×W and nir 1×H×W at the configured patch size.
ForwardOutput fcenet_forward(const ag::Var& noisy, const ag::Var& nir, const ModelWeights& weights,
                             GradTape* tape, FusionDiagnostics* diagnostics = nullptr);
ForwardOutput fcenet_forward(const Tensor& noisy, const Tensor& nir, const ModelWeights& weights);

// Runs the model over a grid of whole patches and returns the clamped stage-2
// output. The image size must be a multiple of the patch size.
Tensor denoise_image(const Tensor& noisy, const Tensor& nir, const ModelWeights& weights);

std::size_t param_count(const ModelConfig& config);

}  // namespace fcenet
