#pragma once

// Frequency-domain fusion blocks.
//
// FDSM (dynamic selection): each branch pools a coarsely fused feature map,
// maps it to per-channel softmax weights over k learnable frequency
// responses, and filters its own input with the resulting convex
// combination.
//
// FEFM (exhaustive fusion): CFR builds a channel-attention-mixed product
// spectrum from Q (RGB) and K (NIR); DFR subtracts the common part from V
// (NIR) with a learnable weight λ; a final Q-gated term restores the common
// content.

#include <utility>

#include "fcenet/layers.hpp"

namespace fcenet {

struct FilterBank {
    int k = 0;
    int height = 0;
    int width = 0;
    Param* kernels = nullptr;  // k×H×W gains

    static FilterBank create(ParamStore& store, const std::string& name, int k, int height, int width);
    // All-ones plus N(0, jitter²).
    void init(CounterRng& rng, double jitter = 0.01) const;
};

struct FdsmParams {
    int channels = 0;
    int k = 0;
    NormLayer norm_rgb;
    NormLayer norm_nir;
    ConvLayer fuse;  // 2C -> 2C, 3×3
    MlpLayer mlp_rgb;
    MlpLayer mlp_nir;
    FilterBank bank_rgb;
    FilterBank bank_nir;

    static FdsmParams create(ParamStore& store, const std::string& name, int channels, int height, int width,
                             int k);
    void init(CounterRng& rng) const;
};

struct FefmParams {
    int channels = 0;
    ConvLayer q_point, q_depth;
    ConvLayer k_point, k_depth;
    ConvLayer v_point, v_depth;
    Param* log_alpha = nullptr;  // α = exp(log_alpha)
    Param* lambda = nullptr;

    static FefmParams create(ParamStore& store, const std::string& name, int channels);
    // α = √C, λ = 0.5, projections default-initialized.
    void init(CounterRng& rng) const;
};

inline int mlp_hidden_width(int channels) { return std::max(1, channels / 2); }

// Per-channel convex combination of the bank's kernels, weighted by
// softmax(mlp(avg_pool(aggregated))). Result is C×H×W.
ag::Var dynamic_filter_weights(const ag::Var& aggregated, const MlpLayer& mlp, const FilterBank& bank,
                               GradTape* tape);

struct FdsmOutput {
    ag::Var rgb;  // F_R
    ag::Var nir;  // F_N
    ag::Var filter_rgb;
    ag::Var filter_nir;
};

FdsmOutput fdsm_forward(const ag::Var& nir, const ag::Var& rgb, const FdsmParams& params, GradTape* tape);

struct CfrOutput {
    ag::CVar fused;      // F_CFR
    ag::Var q;
    ag::Var v;
    ag::Var attention;   // 1×C×C, rows sum to 1
};

// Spectra inside CFR use the orthonormal scaling dft2d(x)/sqrt(H·W), so the
// attention logits are mean spatial inner products divided by α.
CfrOutput cfr_forward(const ag::Var& rgb, const ag::Var& nir, const FefmParams& params, GradTape* tape);

// V − λ·V ⊙ Re(idft2d(F_CFR)).
ag::Var dfr_forward(const ag::Var& v, const ag::CVar& fused, const ag::Var& lambda);

struct FusionDiagnostics {
    double max_imag_residue = 0.0;  // imaginary part dropped by the inverse transform
};

ag::Var fefm_forward(const ag::Var& rgb, const ag::Var& nir, const FefmParams& params, GradTape* tape,
                     FusionDiagnostics* diagnostics = nullptr);

}  // namespace fcenet
