#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcenet/network.hpp"
#include "fcenet/noise.hpp"

namespace fcenet {

// Raised for numeric breakdowns: non-finite losses or gradients.
class NumericError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct LossConfig {
    double charbonnier_eps = 1e-3;
    double freq_weight = 0.1;
    void validate() const;
};

double charbonnier(const Tensor& x, const Tensor& t, double eps);

// Spatial Charbonnier on both stages plus the weighted spectral term on X2.
// Spectra are scaled by 1/sqrt(H·W) before comparison.
ag::Var total_loss(const ag::Var& x1, const ag::Var& x2, const ag::Var& target, const LossConfig& cfg);
double total_loss(const Tensor& x1, const Tensor& x2, const Tensor& target, const LossConfig& cfg);

struct OptimState {
    long step = 0;
    double lr_init = 2e-4;
    double lr_min = 1e-6;
    long total_steps = 500;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void validate() const;
    // Allocates zero moments matching the store if none are present.
    void bind(const ParamStore& params);
};

double cosine_lr(long step, const OptimState& state);

// One bias-corrected Adam update of every parameter from its grad buffer.
// Throws NumericError, leaving parameters untouched, if any gradient is
// non-finite.
void adam_step(ParamStore& params, OptimState& state, double lr);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

struct GradCheckEntry {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-4;
    double max_rel_error() const;
    bool passed() const { return max_rel_error() < tolerance; }
};

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t min_coords = 32;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;
};

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// loss_fn builds the scalar loss through the supplied tape (nullptr for
// plain evaluations). Every parameter is probed at min_coords random
// coordinates, or at all of them when it has fewer.
using LossFn = std::function<ag::Var(GradTape*)>;
GradCheckReport grad_check(const LossFn& loss_fn, std::vector<Param*> params, const GradCheckOptions& opt = {});
GradCheckReport grad_check(const LossFn& loss_fn, ParamStore& store, const GradCheckOptions& opt = {});

struct TrainConfig {
    LossConfig loss;
    double lr_init = 2e-4;
    double lr_min = 1e-6;
    long steps = 500;
    int batch = 8;
    double clip_norm = 1.0;
    int log_every = 10;
    std::uint64_t seed = 0;
};

struct MetricRow {
    long step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double psnr = 0.0;
};

std::string format_metrics_csv(const std::vector<MetricRow>& rows);

struct TrainResult {
    std::vector<MetricRow> log;
    OptimState optim;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Mean total loss and mean X2 PSNR over full triples.
struct EvalResult {
    double loss = 0.0;
    double psnr_out = 0.0;
    double psnr_noisy = 0.0;
};
EvalResult evaluate(const ModelWeights& weights, const std::vector<SceneTriple>& data, const LossConfig& loss);

// Trains on random crops of the dataset (crop size = the model patch size).
// The held-out triple feeds the PSNR column of the log. Raises NumericError
// on a non-finite loss after invoking on_abort with the last finite weights.
TrainResult train_loop(ModelWeights& weights, const std::vector<SceneTriple>& dataset,
                       const SceneTriple& held_out, const TrainConfig& cfg,
                       const std::function<void(const ModelWeights&, const OptimState&)>& on_abort = {});

}  // namespace fcenet
