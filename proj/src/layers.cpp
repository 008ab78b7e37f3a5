#include "fcenet/layers.hpp"

#include <cmath>

namespace fcenet {

Param& ParamStore::add(std::string name, std::vector<int> dims) {
    if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Param>(std::move(name), std::move(dims)));
    return *params_.back();
}

Param* ParamStore::find(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

namespace {

void fill_uniform(Param& p, double bound, CounterRng& rng) {
    for (double& v : p.value.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

ConvLayer ConvLayer::create(ParamStore& store, const std::string& name, const ConvSpec& spec) {
    spec.validate();
    ConvLayer layer;
    layer.spec = spec;
    std::vector<int> wdims;
    if (spec.kind == ConvKind::depthwise) {
        wdims = {spec.out_channels, 1, spec.kernel, spec.kernel};
    } else {
        wdims = {spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    }
    layer.weight = &store.add(name + ".weight", wdims);
    layer.bias = &store.add(name + ".bias", {spec.out_channels});
    return layer;
}

ag::Var ConvLayer::operator()(const ag::Var& x, GradTape* tape) const {
    return ag::conv2d(x, ag::use(*weight, tape), ag::use(*bias, tape), spec);
}

void ConvLayer::init(CounterRng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in()));
    fill_uniform(*weight, bound, rng);
    fill_uniform(*bias, bound, rng);
}

void ConvLayer::zero() const {
    weight->value.fill(0.0);
    bias->value.fill(0.0);
}

ConvParams ConvLayer::snapshot() const {
    return {spec, {weight->value.data().begin(), weight->value.data().end()},
            {bias->value.data().begin(), bias->value.data().end()}};
}

NormLayer NormLayer::create(ParamStore& store, const std::string& name, int channels) {
    return {&store.add(name + ".gamma", {channels}), &store.add(name + ".beta", {channels})};
}

ag::Var NormLayer::operator()(const ag::Var& x, GradTape* tape) const {
    return ag::layer_norm(x, ag::use(*gamma, tape), ag::use(*beta, tape));
}

void NormLayer::init() const {
    gamma->value.fill(1.0);
    beta->value.fill(0.0);
}

MlpLayer MlpLayer::create(ParamStore& store, const std::string& name, int in, int hidden, int out) {
    MlpLayer m;
    m.in = in;
    m.hidden = hidden;
    m.out = out;
    m.w1 = &store.add(name + ".fc1.weight", {hidden, in});
    m.b1 = &store.add(name + ".fc1.bias", {hidden});
    m.w2 = &store.add(name + ".fc2.weight", {out, hidden});
    m.b2 = &store.add(name + ".fc2.bias", {out});
    return m;
}

ag::Var MlpLayer::operator()(const ag::Var& x, GradTape* tape) const {
    ag::Var h = ag::gelu(ag::linear(x, ag::use(*w1, tape), ag::use(*b1, tape), hidden));
    return ag::linear(h, ag::use(*w2, tape), ag::use(*b2, tape), out);
}

void MlpLayer::init(CounterRng& rng) const {
    const double b1_bound = 1.0 / std::sqrt(static_cast<double>(in));
    const double b2_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(*w1, b1_bound, rng);
    fill_uniform(*b1, b1_bound, rng);
    fill_uniform(*w2, b2_bound, rng);
    fill_uniform(*b2, b2_bound, rng);
}

MlpParams MlpLayer::snapshot() const {
    auto copy = [](const Param* p) { return std::vector<double>(p->value.data().begin(), p->value.data().end()); };
    return {in, hidden, out, copy(w1), copy(b1), copy(w2), copy(b2)};
}

ResBlock ResBlock::create(ParamStore& store, const std::string& name, int channels) {
    return {ConvLayer::create(store, name + ".conv1", ConvSpec::standard(channels, channels)),
            ConvLayer::create(store, name + ".conv2", ConvSpec::standard(channels, channels))};
}

ag::Var ResBlock::operator()(const ag::Var& x, GradTape* tape) const {
    return ag::add(x, conv2(ag::gelu(conv1(x, tape)), tape));
}

void ResBlock::init(CounterRng& rng) const {
    conv1.init(rng);
    conv2.init(rng);
}

}  // namespace fcenet
