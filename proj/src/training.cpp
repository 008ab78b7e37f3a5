#include "fcenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "fcenet/metrics.hpp"

namespace fcenet {

void LossConfig::validate() const {
    if (!(charbonnier_eps > 0.0)) throw std::invalid_argument("loss: eps must be positive");
    if (!(freq_weight >= 0.0)) throw std::invalid_argument("loss: freq_weight must be >= 0");
}

double charbonnier(const Tensor& x, const Tensor& t, double eps) {
    return ag::charbonnier(ag::constant(x), ag::constant(t), eps).value()[0];
}

ag::Var total_loss(const ag::Var& x1, const ag::Var& x2, const ag::Var& target, const LossConfig& cfg) {
    cfg.validate();
    const double eps = cfg.charbonnier_eps;
    ag::Var spatial = ag::add(ag::charbonnier(x1, target, eps), ag::charbonnier(x2, target, eps));
    if (cfg.freq_weight == 0.0) return spatial;
    const double ortho = 1.0 / std::sqrt(static_cast<double>(target.shape().plane()));
    ag::Var freq = ag::charbonnier(ag::cscale(ag::dft2d(x2), ortho), ag::cscale(ag::dft2d(target), ortho), eps);
    return ag::add(spatial, ag::scale(freq, cfg.freq_weight));
}

double total_loss(const Tensor& x1, const Tensor& x2, const Tensor& target, const LossConfig& cfg) {
    return total_loss(ag::constant(x1), ag::constant(x2), ag::constant(target), cfg).value()[0];
}

void OptimState::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("optim: betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("optim: eps must be positive");
    if (!(lr_init > 0.0) || !(lr_min >= 0.0) || lr_min > lr_init) {
        throw std::invalid_argument("optim: need 0 <= lr_min <= lr_init, lr_init > 0");
    }
    if (total_steps < 0 || step < 0) throw std::invalid_argument("optim: negative step count");
    if (m.size() != v.size()) throw std::invalid_argument("optim: moment lists differ in length");
}

void OptimState::bind(const ParamStore& params) {
    if (!m.empty()) {
        if (m.size() != params.size()) throw ShapeError("optim: moment count does not match the parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (m[i].shape() != params[i].value.shape() || v[i].shape() != params[i].value.shape()) {
                throw ShapeError("optim: moment shape mismatch for " + params[i].name);
            }
        }
        return;
    }
    for (const auto& p : params) {
        m.push_back(Tensor::zeros_like(p->value));
        v.push_back(Tensor::zeros_like(p->value));
    }
}

double cosine_lr(long step, const OptimState& state) {
    if (step < 0 || step > state.total_steps) {
        throw std::out_of_range("cosine_lr: step " + std::to_string(step) + " outside schedule of " +
                                std::to_string(state.total_steps));
    }
    if (state.total_steps == 0) return state.lr_init;
    const double t = static_cast<double>(step) / static_cast<double>(state.total_steps);
    return state.lr_min + 0.5 * (state.lr_init - state.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void adam_step(ParamStore& params, OptimState& state, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
    state.bind(params);
    for (const auto& p : params) {
        if (p->grad.empty()) continue;
        if (p->grad.shape() != p->value.shape()) throw ShapeError("adam_step: gradient shape mismatch for " + p->name);
        if (!p->grad.all_finite()) throw NumericError("adam_step: non-finite gradient in " + p->name);
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params[i];
        if (p.grad.empty()) continue;
        auto w = p.value.data();
        auto g = p.grad.data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + state.adam_eps);
        }
    }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p->grad.data()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params) p->grad *= s;
    }
    return norm;
}

double GradCheckReport::max_rel_error() const {
    double worst = 0.0;
    for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
    return worst;
}

GradCheckReport grad_check(const LossFn& loss_fn, std::vector<Param*> params, const GradCheckOptions& opt) {
    auto eval = [&] {
        const double v = loss_fn(nullptr).value()[0];
        if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
        return v;
    };
    for (Param* p : params) p->zero_grad();
    {
        GradTape tape;
        ag::Var loss = loss_fn(&tape);
        if (!std::isfinite(loss.value()[0])) throw NumericError("grad_check: non-finite loss");
        tape.backward(loss);
    }

    GradCheckReport report;
    report.tolerance = opt.tolerance;
    CounterRng rng(opt.seed, 0x67636b);
    for (Param* p : params) {
        GradCheckEntry entry{p->name, 0, 0.0};
        const std::size_t n = p->numel();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > opt.min_coords) {
            for (std::size_t i = 0; i < opt.min_coords; ++i) {
                const auto j = i + static_cast<std::size_t>(rng() % (n - i));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(opt.min_coords);
        }
        for (std::size_t idx : coords) {
            const double analytic = p->grad.empty() ? 0.0 : p->grad[idx];
            const double saved = p->value[idx];
            p->value[idx] = saved + opt.step;
            const double up = eval();
            p->value[idx] = saved - opt.step;
            const double down = eval();
            p->value[idx] = saved;
            const double numeric = (up - down) / (2.0 * opt.step);
            entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric));
            ++entry.checked;
        }
        report.entries.push_back(entry);
    }
    return report;
}

GradCheckReport grad_check(const LossFn& loss_fn, ParamStore& store, const GradCheckOptions& opt) {
    std::vector<Param*> params;
    for (auto& p : store) params.push_back(p.get());
    return grad_check(loss_fn, std::move(params), opt);
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out = "step,lr,loss,psnr\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%ld,%.6f,%.6f,%.6f\n", r.step, r.lr, r.loss, r.psnr);
        out += buf;
    }
    return out;
}

EvalResult evaluate(const ModelWeights& weights, const std::vector<SceneTriple>& data, const LossConfig& loss) {
    EvalResult r;
    if (data.empty()) return r;
    for (const auto& t : data) {
        ForwardOutput out = fcenet_forward(t.noisy, t.nir, weights);
        r.loss += total_loss(out.x1.value(), out.x2.value(), t.clean, loss);
        r.psnr_out += psnr(clamp01(out.x2.value()), t.clean);
        r.psnr_noisy += psnr(t.noisy, t.clean);
    }
    const double n = static_cast<double>(data.size());
    r.loss /= n;
    r.psnr_out /= n;
    r.psnr_noisy /= n;
    return r;
}

namespace {

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
    Tensor out(t.channels(), h, w);
    for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out(c, y, x) = t(c, y0 + y, x0 + x);
    return out;
}

struct Sample {
    Tensor clean, nir, noisy;
};

Sample random_crop(const SceneTriple& t, int h, int w, CounterRng& rng) {
    const int H = t.clean.height();
    const int W = t.clean.width();
    const int y0 = H > h ? static_cast<int>(rng() % static_cast<std::uint64_t>(H - h + 1)) : 0;
    const int x0 = W > w ? static_cast<int>(rng() % static_cast<std::uint64_t>(W - w + 1)) : 0;
    return {crop(t.clean, y0, x0, h, w), crop(t.nir, y0, x0, h, w), crop(t.noisy, y0, x0, h, w)};
}

double held_out_psnr(const ModelWeights& weights, const SceneTriple& t) {
    ForwardOutput out = fcenet_forward(t.noisy, t.nir, weights);
    return psnr(clamp01(out.x2.value()), t.clean);
}

}  // namespace

TrainResult train_loop(ModelWeights& weights, const std::vector<SceneTriple>& dataset, const SceneTriple& held_out,
                       const TrainConfig& cfg,
                       const std::function<void(const ModelWeights&, const OptimState&)>& on_abort) {
    if (dataset.empty()) throw std::invalid_argument("train_loop: empty dataset");
    if (cfg.batch < 1) throw std::invalid_argument("train_loop: batch must be >= 1");
    if (cfg.steps < 0) throw std::invalid_argument("train_loop: steps must be >= 0");
    cfg.loss.validate();
    const ModelConfig& mc = weights.config();
    for (const auto& t : dataset) {
        if (t.clean.height() < mc.patch_height || t.clean.width() < mc.patch_width) {
            throw ShapeError("train_loop: training image smaller than the model patch size");
        }
    }

    TrainResult result;
    OptimState& st = result.optim;
    st.lr_init = cfg.lr_init;
    st.lr_min = cfg.lr_min;
    st.total_steps = cfg.steps;
    st.validate();
    st.bind(weights.params());

    result.initial_loss = evaluate(weights, dataset, cfg.loss).loss;

    CounterRng order_rng(cfg.seed, 0x6f72646572);
    CounterRng crop_rng(cfg.seed, 0x63726f70);
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    auto next_index = [&] {
        if (cursor == order.size()) {
            order.resize(dataset.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng() % i]);
            cursor = 0;
        }
        return order[cursor++];
    };

    for (long step = 0; step < cfg.steps; ++step) {
        const double lr = cosine_lr(step, st);
        weights.params().zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            Sample s = random_crop(dataset[next_index()], mc.patch_height, mc.patch_width, crop_rng);
            GradTape tape;
            ForwardOutput out = fcenet_forward(ag::constant(s.noisy), ag::constant(s.nir), weights, &tape);
            ag::Var loss = total_loss(out.x1, out.x2, ag::constant(s.clean), cfg.loss);
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                if (on_abort) on_abort(weights, st);
                throw NumericError("train_loop: non-finite loss at step " + std::to_string(step));
            }
            batch_loss += value / cfg.batch;
            tape.backward(loss, 1.0 / cfg.batch);
        }
        if (cfg.log_every > 0 && step % cfg.log_every == 0) {
            result.log.push_back({step, lr, batch_loss, held_out_psnr(weights, held_out)});
        }
        if (cfg.clip_norm > 0.0) clip_grad_norm(weights.params(), cfg.clip_norm);
        try {
            adam_step(weights.params(), st, lr);
        } catch (const NumericError&) {
            if (on_abort) on_abort(weights, st);
            throw;
        }
    }

    result.final_loss = evaluate(weights, dataset, cfg.loss).loss;
    const double final_lr = cfg.steps > 0 ? cosine_lr(cfg.steps, st) : cfg.lr_init;
    result.log.push_back({cfg.steps, final_lr, result.final_loss, held_out_psnr(weights, held_out)});
    return result;
}

}  // namespace fcenet
