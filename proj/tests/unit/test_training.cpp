#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fcenet/checkpoint.hpp"
#include "fcenet/training.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

namespace {

double charbonnier_oracle(const std::vector<double>& d, double eps) {
    double s = 0.0;
    for (double v : d) s += std::sqrt(v * v + eps * eps);
    return s / static_cast<double>(d.size());
}

// Differences of real and imaginary parts of the orthonormal spectra, by direct summation.
std::vector<double> spectral_differences(const Tensor& x, const Tensor& t) {
    const int H = x.height(), W = x.width();
    const double norm = 1.0 / std::sqrt(double(H * W));
    std::vector<double> out;
    for (int c = 0; c < x.channels(); ++c)
        for (int u = 0; u < H; ++u)
            for (int v = 0; v < W; ++v) {
                Complex acc = 0.0;
                for (int y = 0; y < H; ++y)
                    for (int xx = 0; xx < W; ++xx)
                        acc += (x(c, y, xx) - t(c, y, xx)) *
                               std::polar(1.0, -2.0 * std::numbers::pi * (double(u) * y / H + double(v) * xx / W));
                out.push_back(acc.real() * norm);
                out.push_back(acc.imag() * norm);
            }
    return out;
}

std::vector<double> differences(const Tensor& a, const Tensor& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.base_channels = 4;
    mc.blocks_per_scale = 1;
    mc.k_filters = 2;
    mc.patch_height = 32;
    mc.patch_width = 32;
    return mc;
}

std::vector<SceneTriple> tiny_data(int n) {
    NoiseSpec spec;
    std::vector<SceneTriple> data;
    for (int i = 0; i < n; ++i) data.push_back(synth_triple(derive_seed(5, i), 32, 32, spec));
    return data;
}

}  // namespace

TEST_CASE("charbonnier") {
    const Tensor t = random_tensor({3, 4, 4}, 130);
    CHECK(std::abs(charbonnier(t, t, 1e-3) - 1e-3) < 1e-18);
    Tensor a(1, 1, 1, 3.0), b(1, 1, 1, 0.0);
    CHECK(charbonnier(a, b, 4.0) == 5.0);
    const Tensor x = random_tensor({3, 4, 4}, 131);
    CHECK(std::abs(charbonnier(x, t, 1e-3) - charbonnier_oracle(differences(x, t), 1e-3)) < 1e-12);
    CHECK_THROWS_AS(charbonnier(x, Tensor(3, 4, 2), 1e-3), ShapeError);
}

TEST_CASE("total_loss") {
    const Tensor t = random_tensor({3, 8, 8}, 132, 0.0, 1.0);
    LossConfig cfg;
    CHECK(std::abs(total_loss(t, t, t, cfg) - (2.0 + cfg.freq_weight) * cfg.charbonnier_eps) < 1e-15);

    const Tensor x1 = random_tensor({3, 8, 8}, 133, 0.0, 1.0), x2 = random_tensor({3, 8, 8}, 134, 0.0, 1.0);
    const double s1 = charbonnier_oracle(differences(x1, t), 1e-3);
    const double s2 = charbonnier_oracle(differences(x2, t), 1e-3);
    const double sf = charbonnier_oracle(spectral_differences(x2, t), 1e-3);
    const double expect = s1 + s2 + 0.1 * sf;
    CHECK(std::abs(total_loss(x1, x2, t, cfg) - expect) / expect < 1e-10);

    LossConfig spatial;
    spatial.freq_weight = 0.0;
    CHECK(std::abs(total_loss(x1, x2, t, spatial) - (s1 + s2)) < 1e-12);

    // The taped version matches and sits above the floor.
    const ag::Var v = total_loss(ag::constant(x1), ag::constant(x2), ag::constant(t), cfg);
    CHECK(std::abs(v.value()[0] - total_loss(x1, x2, t, cfg)) < 1e-14);
    CHECK(total_loss(x1, x2, t, cfg) >= 2.1e-3);

    LossConfig bad;
    bad.charbonnier_eps = 0.0;
    CHECK_THROWS(bad.validate());
    bad = LossConfig{};
    bad.freq_weight = -1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("adam") {
    SUBCASE("zero gradient") {
        ParamStore store;
        Param& p = store.add("p", {4});
        p.value = random_tensor(p.value.shape(), 140);
        const Tensor before = p.value;
        p.grad = Tensor::zeros_like(p.value);
        OptimState st;
        adam_step(store, st, 1e-2);
        CHECK(st.step == 1);
        CHECK(max_abs_diff(p.value, before) == 0.0);
    }
    SUBCASE("constant gradient moves against its sign") {
        ParamStore store;
        Param& p = store.add("p", {1});
        OptimState st;
        double prev = 0.0;
        for (int i = 0; i < 20; ++i) {
            p.grad = Tensor(Shape{1, 1, 1}, 0.7);
            adam_step(store, st, 1e-2);
            CHECK(p.value[0] < prev);
            prev = p.value[0];
        }
    }
    SUBCASE("scalar quadratic against a hand-rolled oracle") {
        ParamStore store;
        Param& p = store.add("w", {1});
        p.value[0] = 1.0;
        OptimState st;
        double w = 1.0, m = 0.0, v = 0.0;
        for (int t = 1; t <= 10; ++t) {
            GradTape tape;
            ag::Var x = tape.watch(p);
            store.zero_grad();
            tape.backward(ag::sum(ag::mul(x, x)));
            adam_step(store, st, 0.1);

            const double g = 2.0 * w;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
            w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
            CHECK(std::abs(p.value[0] - w) < 1e-12);
            CHECK(std::abs(p.value[0]) < 1.0);
        }
    }
    SUBCASE("non-finite gradient aborts without touching parameters") {
        ParamStore store;
        Param& a = store.add("a", {2});
        Param& b = store.add("b", {2});
        a.grad = Tensor(Shape{2, 1, 1}, 1.0);
        b.grad = Tensor(Shape{2, 1, 1}, std::numeric_limits<double>::infinity());
        OptimState st;
        CHECK_THROWS_AS(adam_step(store, st, 1e-3), NumericError);
        CHECK(a.value[0] == 0.0);
        CHECK(st.step == 0);
    }
}

TEST_CASE("cosine schedule") {
    OptimState st;
    st.total_steps = 100;
    CHECK(cosine_lr(0, st) == 2e-4);
    CHECK(std::abs(cosine_lr(100, st) - 1e-6) < 1e-18);
    CHECK(std::abs(cosine_lr(50, st) - (2e-4 + 1e-6) / 2.0) < 1e-18);
    double prev = 1.0;
    for (long s = 0; s <= 100; ++s) {
        CHECK(cosine_lr(s, st) <= prev);
        prev = cosine_lr(s, st);
    }
    CHECK_THROWS(cosine_lr(101, st));
}

TEST_CASE("gradient clipping") {
    ParamStore store;
    Param& a = store.add("a", {1});
    Param& b = store.add("b", {1});
    a.grad = Tensor(Shape{1, 1, 1}, 3.0);
    b.grad = Tensor(Shape{1, 1, 1}, 4.0);
    CHECK(clip_grad_norm(store, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad[0] == doctest::Approx(0.6));
    CHECK(b.grad[0] == doctest::Approx(0.8));
    CHECK(clip_grad_norm(store, 10.0) == doctest::Approx(1.0));
    CHECK(a.grad[0] == doctest::Approx(0.6));
}

TEST_CASE("grad_check harness") {
    ParamStore store;
    Param& w = store.add("w", {1});
    w.value[0] = 3.0;
    auto square = [&](GradTape* tape) {
        ag::Var x = ag::use(w, tape);
        return ag::sum(ag::mul(x, x));
    };
    const GradCheckReport r = grad_check(square, store);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].checked == 1);
    CHECK(r.max_rel_error() < 1e-9);
    CHECK(r.passed());

    // A doubled convolution weight gradient gives |2g - g| / |2g| = 1/2.
    ParamStore conv_store;
    Param& cw = conv_store.add("conv.weight", {2, 2, 3, 3});
    Param& cb = conv_store.add("conv.bias", {2});
    cw.value = random_tensor(cw.value.shape(), 150);
    cb.value = random_tensor(cb.value.shape(), 151);
    const Tensor input = random_tensor({2, 6, 6}, 152);
    auto conv_loss = [&](GradTape* tape) {
        ag::Var y = ag::conv2d(ag::constant(input), ag::use(cw, tape), ag::use(cb, tape), ConvSpec::standard(2, 2));
        return test::project(y, 153);
    };
    CHECK(grad_check(conv_loss, conv_store).passed());
    ag::set_conv_weight_grad_fault(2.0);
    const GradCheckReport faulty = grad_check(conv_loss, conv_store);
    ag::set_conv_weight_grad_fault(1.0);
    CHECK_FALSE(faulty.passed());
    CHECK(std::abs(faulty.entries[0].max_rel_error - 0.5) < 1e-6);
    CHECK(faulty.entries[1].max_rel_error < 1e-6);
    CHECK(faulty.entries[0].checked == 32);

    auto bad = [&](GradTape*) { return ag::constant(Tensor(Shape{1, 1, 1}, std::nan(""))); };
    CHECK_THROWS_AS(grad_check(bad, store), NumericError);
}

TEST_CASE("metric CSV") {
    const std::string csv = format_metrics_csv({{0, 2e-4, 0.25, 22.5}, {10, 1e-6, 0.125, 30.0}});
    CHECK(csv == "step,lr,loss,psnr\n0,0.000200,0.250000,22.500000\n10,0.000001,0.125000,30.000000\n");
}

TEST_CASE("train_loop") {
    const auto data = tiny_data(3);
    NoiseSpec spec;
    const SceneTriple held = synth_triple(77, 32, 32, spec);

    SUBCASE("zero steps keep the initialization") {
        ModelWeights w(tiny_config());
        w.init(1);
        const std::string before = serialize_checkpoint(w);
        TrainConfig tc;
        tc.steps = 0;
        const TrainResult r = train_loop(w, data, held, tc);
        CHECK(serialize_checkpoint(w) == before);
        CHECK(r.optim.step == 0);
        REQUIRE(r.log.size() == 1);
        CHECK(r.log[0].loss == r.initial_loss);
    }
    SUBCASE("fixed seed replays bit for bit") {
        TrainConfig tc;
        tc.steps = 50;
        tc.batch = 2;
        tc.seed = 9;
        std::string bytes[2], csv[2];
        for (int run = 0; run < 2; ++run) {
            ModelWeights w(tiny_config());
            w.init(2);
            const TrainResult r = train_loop(w, data, held, tc);
            bytes[run] = serialize_checkpoint(w, &r.optim);
            csv[run] = format_metrics_csv(r.log);
        }
        CHECK(bytes[0] == bytes[1]);
        CHECK(csv[0] == csv[1]);
    }
    SUBCASE("loss falls with and without the spectral term") {
        for (double fw : {0.0, 0.1}) {
            ModelWeights w(tiny_config());
            w.init(3);
            TrainConfig tc;
            tc.steps = 40;
            tc.batch = 2;
            tc.lr_init = 2e-3;
            tc.loss.freq_weight = fw;
            const TrainResult r = train_loop(w, data, held, tc);
            INFO("freq_weight " << fw);
            CHECK(r.final_loss < r.initial_loss);
        }
    }
    SUBCASE("non-finite loss aborts and reports the last weights") {
        auto poisoned = data;
        poisoned[0].noisy[0] = std::nan("");
        poisoned.resize(1);
        ModelWeights w(tiny_config());
        w.init(4);
        TrainConfig tc;
        tc.steps = 5;
        tc.batch = 1;
        bool called = false;
        // The initial evaluation already sees the NaN, so the failure surfaces at step 0.
        CHECK_THROWS_AS(train_loop(w, poisoned, held, tc,
                                   [&](const ModelWeights&, const OptimState& st) {
                                       called = true;
                                       CHECK(st.step == 0);
                                   }),
                        NumericError);
        CHECK(called);
    }
    SUBCASE("argument errors") {
        ModelWeights w(tiny_config());
        w.init(5);
        TrainConfig tc;
        CHECK_THROWS(train_loop(w, {}, held, tc));
        tc.batch = 0;
        CHECK_THROWS(train_loop(w, data, held, tc));
    }
}
