#include "fcenet/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace fcenet {

namespace {

Tensor random_tensor(Shape s, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Fixed random projection of a feature map to a scalar.
ag::Var project(const ag::Var& x, const Tensor& weights) { return ag::sum(ag::mul(x, ag::constant(weights))); }

// Pushes every parameter away from its default so no gradient path is
// trivially inactive (unit gains, zero biases, and so on).
void perturb(ParamStore& store, CounterRng& rng, double scale) {
    for (auto& p : store)
        for (double& v : p->value.data()) v += rng.uniform(-scale, scale);
}

GradCheckReport check_fdsm(std::uint64_t seed, const GradCheckOptions& opt) {
    constexpr int C = 2, H = 8, W = 8, K = 3;
    CounterRng rng(seed, 0x666473);
    ParamStore store;
    FdsmParams p = FdsmParams::create(store, "fdsm", C, H, W, K);
    p.init(rng);
    perturb(store, rng, 0.2);
    const Tensor n = random_tensor({C, H, W}, rng);
    const Tensor r = random_tensor({C, H, W}, rng);
    const Tensor wr = random_tensor({C, H, W}, rng);
    const Tensor wn = random_tensor({C, H, W}, rng);
    auto loss = [&](GradTape* tape) {
        FdsmOutput out = fdsm_forward(ag::constant(n), ag::constant(r), p, tape);
        return ag::add(project(out.rgb, wr), project(out.nir, wn));
    };
    return grad_check(loss, store, opt);
}

GradCheckReport check_fefm(std::uint64_t seed, const GradCheckOptions& opt) {
    constexpr int C = 2, H = 8, W = 8;
    CounterRng rng(seed, 0x6665666d);
    ParamStore store;
    FefmParams p = FefmParams::create(store, "fefm", C);
    p.init(rng);
    perturb(store, rng, 0.2);
    const Tensor fr = random_tensor({C, H, W}, rng);
    const Tensor fn = random_tensor({C, H, W}, rng);
    const Tensor w = random_tensor({C, H, W}, rng);
    auto loss = [&](GradTape* tape) { return project(fefm_forward(ag::constant(fr), ag::constant(fn), p, tape), w); };
    return grad_check(loss, store, opt);
}

GradCheckReport check_sam(std::uint64_t seed, const GradCheckOptions& opt) {
    constexpr int C = 4, H = 8, W = 8;
    CounterRng rng(seed, 0x73616d);
    ParamStore store;
    SamParams p{ConvLayer::create(store, "sam.to_image", ConvSpec::standard(C, 3)),
                ConvLayer::create(store, "sam.to_mask", ConvSpec::standard(3, C)),
                ConvLayer::create(store, "sam.features", ConvSpec::standard(C, C))};
    p.to_image.init(rng);
    p.to_mask.init(rng);
    p.features.init(rng);
    const Tensor feat = random_tensor({C, H, W}, rng);
    const Tensor img = random_tensor({3, H, W}, rng, 0.0, 1.0);
    const Tensor wr = random_tensor({3, H, W}, rng);
    const Tensor wb = random_tensor({C, H, W}, rng);
    auto loss = [&](GradTape* tape) {
        SamOutput out = sam_forward(ag::constant(feat), ag::constant(img), p, tape);
        return ag::add(project(out.restored, wr), project(out.bridged, wb));
    };
    return grad_check(loss, store, opt);
}

GradCheckReport check_network(std::uint64_t seed, const GradCheckOptions& opt) {
    const ModelConfig mc = gradcheck_network_config();
    ModelWeights w(mc);
    w.init(seed);
    CounterRng rng(seed, 0x6e6574);
    perturb(w.params(), rng, 0.05);
    // Near-identical kernels make the selection weights almost inert, which
    // leaves their gradients below the finite-difference noise floor.
    for (const auto& f : w.fdsm) {
        for (const FilterBank* b : {&f.bank_rgb, &f.bank_nir})
            for (double& v : b->kernels->value.data()) v = rng.uniform(0.25, 1.75);
    }
    const Shape rgb{3, mc.patch_height, mc.patch_width};
    const Shape nir{1, mc.patch_height, mc.patch_width};
    const Tensor noisy = random_tensor(rgb, rng, 0.0, 1.0);
    const Tensor nir_img = random_tensor(nir, rng, 0.0, 1.0);

    // X2 = X1 + residual depends on every tensor. The loss is a positive
    // projection of X2 minus its starting value: it stays near zero, so its
    // rounding error sits far below the smallest stage-2 gradients (~1e-9).
    const Tensor base = fcenet_forward(noisy, nir_img, w).x2.value();
    const Tensor pw = random_tensor(rgb, rng, 0.5, 1.5);
    const double inv_n = 1.0 / static_cast<double>(base.size());
    auto net_loss = [&](GradTape* tape) {
        const ag::Var x2 = fcenet_forward(ag::constant(noisy), ag::constant(nir_img), w, tape).x2;
        return ag::scale(project(ag::sub(x2, ag::constant(base)), pw), inv_n);
    };
    GradCheckReport report = grad_check(net_loss, w.params(), opt);

    // The training loss itself, differentiated through both outputs.
    ParamStore outs;
    Param& x1 = outs.add("loss.x1", {3, 8, 8});
    Param& x2 = outs.add("loss.x2", {3, 8, 8});
    const Tensor target = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
    // Residuals stay well clear of the Charbonnier eps.
    for (Param* p : {&x1, &x2}) {
        p->value = target;
        for (double& v : p->value.data()) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.3);
    }
    auto train_loss = [&](GradTape* tape) {
        return total_loss(ag::use(x1, tape), ag::use(x2, tape), ag::constant(target), LossConfig{});
    };
    GradCheckReport lr = grad_check(train_loss, outs, opt);
    report.entries.insert(report.entries.end(), lr.entries.begin(), lr.entries.end());
    return report;
}

}  // namespace

ModelConfig gradcheck_network_config() {
    ModelConfig mc;
    mc.base_channels = 4;
    mc.blocks_per_scale = 1;
    mc.k_filters = 2;
    mc.patch_height = 16;
    mc.patch_width = 16;
    return mc;
}

const std::vector<std::string>& gradcheck_modules() {
    static const std::vector<std::string> m = {"fdsm", "fefm", "sam", "network"};
    return m;
}

std::vector<SuiteResult> run_gradcheck_suite(const std::string& module, std::uint64_t seed,
                                             const GradCheckOptions& options) {
    std::vector<std::string> selected;
    if (module == "all") {
        selected = gradcheck_modules();
    } else if (std::find(gradcheck_modules().begin(), gradcheck_modules().end(), module) !=
               gradcheck_modules().end()) {
        selected = {module};
    } else {
        throw std::invalid_argument("unknown gradcheck module '" + module + "'");
    }
    std::vector<SuiteResult> out;
    for (const auto& m : selected) {
        GradCheckOptions opt = options;
        const auto id = std::find(gradcheck_modules().begin(), gradcheck_modules().end(), m) - gradcheck_modules().begin();
        opt.seed = derive_seed(seed, static_cast<std::uint64_t>(id) + 1);
        const auto t0 = std::chrono::steady_clock::now();
        SuiteResult r{m, {}, 0.0};
        if (m == "fdsm") r.report = check_fdsm(seed, opt);
        if (m == "fefm") r.report = check_fefm(seed, opt);
        if (m == "sam") r.report = check_sam(seed, opt);
        if (m == "network") r.report = check_network(seed, opt);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_gradcheck_table(const std::vector<SuiteResult>& results) {
    std::string s;
    char buf[256];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "[%s] %zu tensors, %.2fs\n", r.module.c_str(), r.report.entries.size(),
                      r.seconds);
        s += buf;
        for (const auto& e : r.report.entries) {
            std::snprintf(buf, sizeof buf, "  %-44s %4zu  %.3e  %s\n", e.name.c_str(), e.checked, e.max_rel_error,
                          e.max_rel_error < r.report.tolerance ? "ok" : "FAIL");
            s += buf;
        }
    }
    return s;
}

}  // namespace fcenet
