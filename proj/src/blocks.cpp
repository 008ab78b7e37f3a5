#include "fcenet/blocks.hpp"

#include <cmath>

namespace fcenet {

FilterBank FilterBank::create(ParamStore& store, const std::string& name, int k, int height, int width) {
    if (k < 1) throw std::invalid_argument("FilterBank: k must be >= 1");
    return {k, height, width, &store.add(name, {k, height, width})};
}

void FilterBank::init(CounterRng& rng, double jitter) const {
    for (double& v : kernels->value.data()) v = 1.0 + rng.normal(0.0, jitter);
}

FdsmParams FdsmParams::create(ParamStore& store, const std::string& name, int channels, int height, int width,
                              int k) {
    FdsmParams p;
    p.channels = channels;
    p.k = k;
    p.norm_rgb = NormLayer::create(store, name + ".norm_rgb", channels);
    p.norm_nir = NormLayer::create(store, name + ".norm_nir", channels);
    p.fuse = ConvLayer::create(store, name + ".fuse", ConvSpec::standard(2 * channels, 2 * channels));
    const int hidden = mlp_hidden_width(channels);
    p.mlp_rgb = MlpLayer::create(store, name + ".mlp_rgb", channels, hidden, channels * k);
    p.mlp_nir = MlpLayer::create(store, name + ".mlp_nir", channels, hidden, channels * k);
    p.bank_rgb = FilterBank::create(store, name + ".bank_rgb", k, height, width);
    p.bank_nir = FilterBank::create(store, name + ".bank_nir", k, height, width);
    return p;
}

void FdsmParams::init(CounterRng& rng) const {
    norm_rgb.init();
    norm_nir.init();
    fuse.init(rng);
    mlp_rgb.init(rng);
    mlp_nir.init(rng);
    bank_rgb.init(rng);
    bank_nir.init(rng);
}

FefmParams FefmParams::create(ParamStore& store, const std::string& name, int channels) {
    FefmParams p;
    p.channels = channels;
    p.q_point = ConvLayer::create(store, name + ".q_point", ConvSpec::pointwise(channels, channels));
    p.q_depth = ConvLayer::create(store, name + ".q_depth", ConvSpec::depthwise(channels));
    p.k_point = ConvLayer::create(store, name + ".k_point", ConvSpec::pointwise(channels, channels));
    p.k_depth = ConvLayer::create(store, name + ".k_depth", ConvSpec::depthwise(channels));
    p.v_point = ConvLayer::create(store, name + ".v_point", ConvSpec::pointwise(channels, channels));
    p.v_depth = ConvLayer::create(store, name + ".v_depth", ConvSpec::depthwise(channels));
    p.log_alpha = &store.add(name + ".log_alpha", {1});
    p.lambda = &store.add(name + ".lambda", {1});
    return p;
}

void FefmParams::init(CounterRng& rng) const {
    for (const ConvLayer* c : {&q_point, &q_depth, &k_point, &k_depth, &v_point, &v_depth}) c->init(rng);
    log_alpha->value[0] = 0.5 * std::log(static_cast<double>(channels));
    lambda->value[0] = 0.5;
}

ag::Var dynamic_filter_weights(const ag::Var& aggregated, const MlpLayer& mlp, const FilterBank& bank,
                               GradTape* tape) {
    const int C = aggregated.shape().channels;
    if (mlp.in != C || mlp.out != C * bank.k) {
        throw ShapeError("dynamic_filter_weights: MLP must map C -> C*k");
    }
    ag::Var logits = mlp(ag::global_avg_pool(aggregated), tape);
    ag::Var weights = ag::softmax_rows(logits, bank.k);
    return ag::combine_kernels(weights, ag::use(*bank.kernels, tape), bank.k);
}

namespace {

ag::Var filter_features(const ag::Var& x, const ag::Var& gains) {
    return ag::real(ag::idft2d(ag::apply_filter(ag::dft2d(x), gains)));
}

}  // namespace

FdsmOutput fdsm_forward(const ag::Var& nir, const ag::Var& rgb, const FdsmParams& params, GradTape* tape) {
    if (nir.shape() != rgb.shape()) {
        throw ShapeError("fdsm_forward: NIR " + to_string(nir.shape()) + " vs RGB " + to_string(rgb.shape()));
    }
    if (nir.shape().channels != params.channels || nir.shape().height != params.bank_rgb.height ||
        nir.shape().width != params.bank_rgb.width) {
        throw ShapeError("fdsm_forward: features " + to_string(nir.shape()) + " do not match the block geometry");
    }
    const int C = params.channels;
    ag::Var joint = ag::concat_channels(params.norm_rgb(rgb, tape), params.norm_nir(nir, tape));
    ag::Var coarse = ag::gelu(params.fuse(joint, tape));
    ag::Var agg_rgb = ag::slice_channels(coarse, 0, C);
    ag::Var agg_nir = ag::slice_channels(coarse, C, C);

    FdsmOutput out;
    out.filter_rgb = dynamic_filter_weights(agg_rgb, params.mlp_rgb, params.bank_rgb, tape);
    out.filter_nir = dynamic_filter_weights(agg_nir, params.mlp_nir, params.bank_nir, tape);
    out.rgb = filter_features(rgb, out.filter_rgb);
    out.nir = filter_features(nir, out.filter_nir);
    return out;
}

CfrOutput cfr_forward(const ag::Var& rgb, const ag::Var& nir, const FefmParams& params, GradTape* tape) {
    if (rgb.shape() != nir.shape()) {
        throw ShapeError("cfr_forward: shape mismatch " + to_string(rgb.shape()) + " vs " + to_string(nir.shape()));
    }
    const Shape s = rgb.shape();
    const double bins = static_cast<double>(s.plane());
    const double ortho = 1.0 / std::sqrt(bins);

    CfrOutput out;
    out.q = params.q_depth(params.q_point(rgb, tape), tape);
    ag::Var k = params.k_depth(params.k_point(nir, tape), tape);
    out.v = params.v_depth(params.v_point(nir, tape), tape);

    ag::CVar fq = ag::cscale(ag::dft2d(out.q), ortho);
    ag::CVar fk = ag::cscale(ag::dft2d(k), ortho);
    ag::Var inv_alpha = ag::exp(ag::scale(ag::use(*params.log_alpha, tape), -1.0));
    ag::Var logits = ag::scale(ag::scale(ag::channel_correlation(fq, fk), 1.0 / bins), inv_alpha);
    out.attention = ag::softmax_rows(logits, s.channels);
    out.fused = ag::channel_mix(out.attention, ag::cmul(fq, fk));
    return out;
}

ag::Var dfr_forward(const ag::Var& v, const ag::CVar& fused, const ag::Var& lambda) {
    if (v.shape() != fused.shape()) throw ShapeError("dfr_forward: shape mismatch");
    ag::Var common = ag::real(ag::idft2d(fused));
    return ag::sub(v, ag::scale(ag::mul(v, common), lambda));
}

ag::Var fefm_forward(const ag::Var& rgb, const ag::Var& nir, const FefmParams& params, GradTape* tape,
                     FusionDiagnostics* diagnostics) {
    CfrOutput cfr = cfr_forward(rgb, nir, params, tape);
    ag::CVar spatial = ag::idft2d(cfr.fused);
    if (diagnostics != nullptr) {
        InverseDiagnostics d;
        real_part(spatial.value(), &d);
        diagnostics->max_imag_residue = std::max(diagnostics->max_imag_residue, d.max_abs_imag);
    }
    ag::Var common = ag::real(spatial);
    ag::Var lambda = ag::use(*params.lambda, tape);
    ag::Var differential = ag::sub(cfr.v, ag::scale(ag::mul(cfr.v, common), lambda));
    return ag::add(differential, ag::mul(cfr.q, common));
}

}  // namespace fcenet
