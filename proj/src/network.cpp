#include "fcenet/network.hpp"

#include <algorithm>

#include "fcenet/training.hpp"

namespace fcenet {

void ModelConfig::validate() const {
    if (base_channels < 4) throw std::invalid_argument("model: base_channels must be >= 4");
    if (blocks_per_scale < 0) throw std::invalid_argument("model: blocks_per_scale must be >= 0");
    if (k_filters < 1) throw std::invalid_argument("model: k_filters must be >= 1");
    const int div = 1 << (scales - 1);
    if (patch_height < div || patch_width < div || patch_height % div != 0 || patch_width % div != 0) {
        throw std::invalid_argument("model: patch size must be a positive multiple of " + std::to_string(div));
    }
}

namespace {

std::string scoped(const std::string& prefix, const char* part, int i) {
    return prefix + "." + part + std::to_string(i);
}

UnetEncoder make_encoder(ParamStore& store, const std::string& name, const ModelConfig& cfg, int in_channels,
                         bool with_stem) {
    UnetEncoder e;
    if (with_stem) e.stem = ConvLayer::create(store, name + ".stem", ConvSpec::standard(in_channels, cfg.base_channels));
    e.blocks.resize(ModelConfig::scales);
    for (int s = 0; s < ModelConfig::scales; ++s) {
        for (int b = 0; b < cfg.blocks_per_scale; ++b) {
            e.blocks[s].push_back(
                ResBlock::create(store, scoped(name, "scale", s) + ".block" + std::to_string(b), cfg.channels_at(s)));
        }
        if (s + 1 < ModelConfig::scales) {
            e.down.push_back(ConvLayer::create(store, scoped(name, "down", s),
                                               ConvSpec::strided_down(cfg.channels_at(s), cfg.channels_at(s + 1))));
        }
    }
    return e;
}

UnetDecoder make_decoder(ParamStore& store, const std::string& name, const ModelConfig& cfg) {
    UnetDecoder d;
    d.up.resize(ModelConfig::scales - 1);
    d.skip.resize(ModelConfig::scales - 1);
    d.blocks.resize(ModelConfig::scales - 1);
    for (int s = ModelConfig::scales - 2; s >= 0; --s) {
        const int c = cfg.channels_at(s);
        d.up[s] = ConvLayer::create(store, scoped(name, "up", s), ConvSpec::standard(cfg.channels_at(s + 1), c));
        d.skip[s] = ConvLayer::create(store, scoped(name, "skip", s), ConvSpec::pointwise(c, c));
        for (int b = 0; b < cfg.blocks_per_scale; ++b) {
            d.blocks[s].push_back(ResBlock::create(store, scoped(name, "scale", s) + ".block" + std::to_string(b), c));
        }
    }
    return d;
}

void init_encoder(const UnetEncoder& e, CounterRng& rng, bool with_stem) {
    if (with_stem) e.stem.init(rng);
    for (const auto& scale : e.blocks)
        for (const auto& b : scale) b.init(rng);
    for (const auto& d : e.down) d.init(rng);
}

void init_decoder(const UnetDecoder& d, CounterRng& rng) {
    for (int s = static_cast<int>(d.up.size()) - 1; s >= 0; --s) {
        d.up[s].init(rng);
        d.skip[s].init(rng);
        for (const auto& b : d.blocks[s]) b.init(rng);
    }
}

ag::Var run_blocks(ag::Var x, const std::vector<ResBlock>& blocks, GradTape* tape) {
    for (const auto& b : blocks) x = b(x, tape);
    return x;
}

// Decodes from per-scale encoder features (finest first) to full resolution.
ag::Var decode(const std::vector<ag::Var>& feats, const UnetDecoder& dec, GradTape* tape) {
    ag::Var x = feats.back();
    for (int s = static_cast<int>(feats.size()) - 2; s >= 0; --s) {
        ag::Var up = dec.up[s](ag::upsample_nearest2x(x), tape);
        x = run_blocks(ag::add(up, dec.skip[s](feats[s], tape)), dec.blocks[s], tape);
    }
    return x;
}

}  // namespace

ModelWeights::ModelWeights(const ModelConfig& config) : config_(config) {
    config_.validate();
    const int C = config_.base_channels;
    s1_enc = make_encoder(store_, "stage1.enc", config_, ModelConfig::in_channels_rgb, true);
    s1_dec = make_decoder(store_, "stage1.dec", config_);
    sam.to_image = ConvLayer::create(store_, "sam.to_image", ConvSpec::standard(C, ModelConfig::in_channels_rgb));
    sam.to_mask = ConvLayer::create(store_, "sam.to_mask", ConvSpec::standard(ModelConfig::in_channels_rgb, C));
    sam.features = ConvLayer::create(store_, "sam.features", ConvSpec::standard(C, C));
    nir_enc = make_encoder(store_, "stage2.nir", config_, ModelConfig::in_channels_nir, true);
    x1_embed = ConvLayer::create(store_, "stage2.x1_embed", ConvSpec::standard(ModelConfig::in_channels_rgb, C));
    merge = ConvLayer::create(store_, "stage2.merge", ConvSpec::pointwise(2 * C, C));
    rgb_enc = make_encoder(store_, "stage2.rgb", config_, 0, false);
    for (int s = 0; s < ModelConfig::scales; ++s) {
        const int c = config_.channels_at(s);
        fdsm.push_back(FdsmParams::create(store_, scoped("stage2", "fdsm", s), c, config_.patch_height >> s,
                                          config_.patch_width >> s, config_.k_filters));
        fefm.push_back(FefmParams::create(store_, scoped("stage2", "fefm", s), c));
    }
    s2_dec = make_decoder(store_, "stage2.dec", config_);
    head = ConvLayer::create(store_, "stage2.head", ConvSpec::standard(C, ModelConfig::in_channels_rgb));
}

void ModelWeights::init(std::uint64_t seed) {
    CounterRng rng(seed, 0x6d6f64656cULL);
    init_encoder(s1_enc, rng, true);
    init_decoder(s1_dec, rng);
    sam.to_image.init(rng);
    sam.to_mask.init(rng);
    sam.features.init(rng);
    init_encoder(nir_enc, rng, true);
    x1_embed.init(rng);
    merge.init(rng);
    init_encoder(rgb_enc, rng, false);
    for (int s = 0; s < ModelConfig::scales; ++s) {
        fdsm[s].init(rng);
        fefm[s].init(rng);
    }
    init_decoder(s2_dec, rng);
    head.init(rng);
    store_.zero_grad();
}

void ModelWeights::zero_output_heads() {
    sam.to_image.zero();
    head.zero();
}

SamOutput sam_forward(const ag::Var& features, const ag::Var& input_image, const SamParams& params,
                      GradTape* tape) {
    if (features.shape().height != input_image.shape().height ||
        features.shape().width != input_image.shape().width) {
        throw ShapeError("sam_forward: features " + to_string(features.shape()) + " vs image " +
                         to_string(input_image.shape()));
    }
    SamOutput out;
    out.restored = ag::add(input_image, params.to_image(features, tape));
    ag::Var mask = ag::sigmoid(params.to_mask(out.restored, tape));
    out.bridged = ag::add(ag::mul(params.features(features, tape), mask), features);
    return out;
}

ForwardOutput fcenet_forward(const ag::Var& noisy, const ag::Var& nir, const ModelWeights& w, GradTape* tape,
                             FusionDiagnostics* diagnostics) {
    const ModelConfig& cfg = w.config();
    const Shape expect_rgb{ModelConfig::in_channels_rgb, cfg.patch_height, cfg.patch_width};
    const Shape expect_nir{ModelConfig::in_channels_nir, cfg.patch_height, cfg.patch_width};
    if (noisy.shape() != expect_rgb || nir.shape() != expect_nir) {
        throw ShapeError("fcenet_forward: expected RGB " + to_string(expect_rgb) + " and NIR " +
                         to_string(expect_nir) + ", got " + to_string(noisy.shape()) + " and " +
                         to_string(nir.shape()));
    }
    constexpr int S = ModelConfig::scales;

    // Stage 1.
    std::vector<ag::Var> enc(S);
    enc[0] = run_blocks(w.s1_enc.stem(noisy, tape), w.s1_enc.blocks[0], tape);
    for (int s = 1; s < S; ++s) enc[s] = run_blocks(w.s1_enc.down[s - 1](enc[s - 1], tape), w.s1_enc.blocks[s], tape);
    ag::Var feat1 = decode(enc, w.s1_dec, tape);
    SamOutput sam = sam_forward(feat1, noisy, w.sam, tape);

    // Stage 2.
    ForwardOutput out;
    out.x1 = sam.restored;
    ag::Var n = run_blocks(w.nir_enc.stem(nir, tape), w.nir_enc.blocks[0], tape);
    ag::Var r = w.merge(ag::concat_channels(sam.bridged, w.x1_embed(out.x1, tape)), tape);
    r = run_blocks(r, w.rgb_enc.blocks[0], tape);
    std::vector<ag::Var> fused(S);
    for (int s = 0; s < S; ++s) {
        if (s > 0) {
            n = run_blocks(w.nir_enc.down[s - 1](n, tape), w.nir_enc.blocks[s], tape);
            r = run_blocks(w.rgb_enc.down[s - 1](fused[s - 1], tape), w.rgb_enc.blocks[s], tape);
        }
        FdsmOutput sel = fdsm_forward(n, r, w.fdsm[s], tape);
        fused[s] = fefm_forward(sel.rgb, sel.nir, w.fefm[s], tape, diagnostics);
    }
    out.x2 = ag::add(out.x1, w.head(decode(fused, w.s2_dec, tape), tape));
    return out;
}

ForwardOutput fcenet_forward(const Tensor& noisy, const Tensor& nir, const ModelWeights& weights) {
    return fcenet_forward(ag::constant(noisy), ag::constant(nir), weights, nullptr);
}

Tensor denoise_image(const Tensor& noisy, const Tensor& nir, const ModelWeights& weights) {
    const ModelConfig& mc = weights.config();
    const int H = noisy.height(), W = noisy.width(), ph = mc.patch_height, pw = mc.patch_width;
    if (noisy.channels() != 3 || nir.channels() != 1 || nir.height() != H || nir.width() != W)
        throw ShapeError("denoise_image: expected 3xHxW noisy and 1xHxW nir");
    if (H % ph != 0 || W % pw != 0) throw ShapeError("denoise_image: size must be a multiple of the patch size");
    Tensor out(3, H, W), pn(3, ph, pw), pr(1, ph, pw);
    for (int y0 = 0; y0 < H; y0 += ph)
        for (int x0 = 0; x0 < W; x0 += pw) {
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ph; ++y)
                    for (int x = 0; x < pw; ++x) pn(c, y, x) = noisy(c, y0 + y, x0 + x);
            for (int y = 0; y < ph; ++y)
                for (int x = 0; x < pw; ++x) pr(0, y, x) = nir(0, y0 + y, x0 + x);
            const Tensor tile = fcenet_forward(pn, pr, weights).x2.value();
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ph; ++y)
                    for (int x = 0; x < pw; ++x) out(c, y0 + y, x0 + x) = std::clamp(tile(c, y, x), 0.0, 1.0);
        }
    if (!out.all_finite()) throw NumericError("denoise_image: non-finite output");
    return out;
}

std::size_t param_count(const ModelConfig& config) {
    return ModelWeights(config).params().scalar_count();
}

}  // namespace fcenet
