#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fcenet/autograd.hpp"
#include "fcenet/noise.hpp"

namespace fcenet {

using ag::GradTape;
using ag::Param;

// Owns every learnable tensor of a model in registration order. Handles
// returned by add() stay valid for the store's lifetime.
class ParamStore {
   public:
    ParamStore() = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;
    ParamStore(ParamStore&&) = default;
    ParamStore& operator=(ParamStore&&) = default;

    Param& add(std::string name, std::vector<int> dims);
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

    std::size_t size() const { return params_.size(); }
    Param& operator[](std::size_t i) { return *params_[i]; }
    const Param& operator[](std::size_t i) const { return *params_[i]; }
    std::size_t scalar_count() const;
    void zero_grad();

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

   private:
    std::vector<std::unique_ptr<Param>> params_;
};

struct ConvLayer {
    ConvSpec spec;
    Param* weight = nullptr;
    Param* bias = nullptr;

    static ConvLayer create(ParamStore& store, const std::string& name, const ConvSpec& spec);
    ag::Var operator()(const ag::Var& x, GradTape* tape) const;
    // Uniform(±1/sqrt(fan_in)) for weights and bias.
    void init(CounterRng& rng) const;
    void zero() const;
    ConvParams snapshot() const;
};

struct NormLayer {
    Param* gamma = nullptr;
    Param* beta = nullptr;

    static NormLayer create(ParamStore& store, const std::string& name, int channels);
    ag::Var operator()(const ag::Var& x, GradTape* tape) const;
    void init() const;
};

// affine -> GELU -> affine.
struct MlpLayer {
    int in = 0;
    int hidden = 0;
    int out = 0;
    Param* w1 = nullptr;
    Param* b1 = nullptr;
    Param* w2 = nullptr;
    Param* b2 = nullptr;

    static MlpLayer create(ParamStore& store, const std::string& name, int in, int hidden, int out);
    ag::Var operator()(const ag::Var& x, GradTape* tape) const;
    void init(CounterRng& rng) const;
    MlpParams snapshot() const;
};

// x + conv(GELU(conv(x))).
struct ResBlock {
    ConvLayer conv1;
    ConvLayer conv2;

    static ResBlock create(ParamStore& store, const std::string& name, int channels);
    ag::Var operator()(const ag::Var& x, GradTape* tape) const;
    void init(CounterRng& rng) const;
};

}  // namespace fcenet
