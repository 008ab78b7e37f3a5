#pragma once

// Tape-based reverse-mode differentiation over real and complex tensors.
//
// Complex gradients follow the convention grad = dL/dRe + i·dL/dIm, so a
// complex-linear map y = M·x back-propagates as gx = Mᴴ·gy.
//
// Values produced from inputs that are not attached to a tape are plain
// constants: no closure is recorded, so the same model code serves for
// inference and for training.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fcenet/nn.hpp"
#include "fcenet/spectral.hpp"
#include "fcenet/tensor.hpp"

namespace fcenet::ag {

// A learnable tensor with a logical shape used for serialization.
struct Param {
    std::string name;
    std::vector<int> dims;
    Tensor value;
    Tensor grad;

    Param(std::string name, std::vector<int> dims);
    std::size_t numel() const { return value.size(); }
    void zero_grad();
};

class GradTape;

template <class T>
struct Node {
    T value;
    T grad;
    GradTape* tape = nullptr;

    T& grad_buffer() {
        if (grad.empty()) grad = T::zeros_like(value);
        return grad;
    }
};

class Var {
   public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<Tensor>> n) : node_(std::move(n)) {}

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    GradTape* tape() const { return node_->tape; }
    bool tracked() const { return node_->tape != nullptr; }
    // Gradient accumulated during GradTape::backward, empty if none reached.
    const Tensor& grad() const { return node_->grad; }
    const std::shared_ptr<Node<Tensor>>& node() const { return node_; }

   private:
    std::shared_ptr<Node<Tensor>> node_;
};

class CVar {
   public:
    CVar() = default;
    explicit CVar(std::shared_ptr<Node<Spectrum>> n) : node_(std::move(n)) {}

    const Spectrum& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    GradTape* tape() const { return node_->tape; }
    bool tracked() const { return node_->tape != nullptr; }
    const Spectrum& grad() const { return node_->grad; }
    const std::shared_ptr<Node<Spectrum>>& node() const { return node_; }

   private:
    std::shared_ptr<Node<Spectrum>> node_;
};

Var constant(Tensor value);
CVar constant(Spectrum value);

class GradTape {
   public:
    GradTape() = default;
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    // Leaf bound to a parameter; backward() adds its gradient into p.grad.
    Var watch(Param& p);
    // Leaf holding an arbitrary tensor (inputs whose gradient is wanted).
    Var leaf(Tensor value);

    void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return ops_.size(); }

    // Seeds d(output)/d(output) = seed and replays the tape in reverse.
    // The output must hold exactly one element.
    void backward(const Var& output, double seed = 1.0);

   private:
    std::vector<std::function<void()>> ops_;
    std::vector<std::pair<std::shared_ptr<Node<Tensor>>, Param*>> params_;
};

// Bind a parameter through the tape when one is given, else as a constant.
Var use(Param& p, GradTape* tape);

// Test hook: multiplies every convolution weight gradient by the factor.
void set_conv_weight_grad_fault(double factor);
double conv_weight_grad_fault();

// Elementwise arithmetic (identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a · s where s holds a single element.
Var scale(const Var& a, const Var& s);
Var exp(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);

Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvSpec& spec);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = kLayerNormEps);
Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& x, int begin, int count);
Var upsample_nearest2x(const Var& x);
// (C, 1, 1) channel means.
Var global_avg_pool(const Var& x);
// y = W·x + b for x of shape (n, 1, 1) and W row-major [out][n].
Var linear(const Var& x, const Var& weight, const Var& bias, int out);
// Softmax over consecutive groups of `cols` elements.
Var softmax_rows(const Var& x, int cols);
// out[c] = Σ_j weights[c·k + j] · kernels[j] over k maps of size H×W.
Var combine_kernels(const Var& weights, const Var& kernels, int k);
Var sum(const Var& x);
Var mean(const Var& x);
// mean(sqrt((x − t)² + eps²)).
Var charbonnier(const Var& x, const Var& t, double eps);

// Spectral operations.
CVar dft2d(const Var& x);
CVar idft2d(const CVar& x);
Var real(const CVar& x);
CVar cmul(const CVar& a, const CVar& b);
CVar cscale(const CVar& a, double s);
// Multiplies each bin by a real gain; gains are (C|1)×H×W.
CVar apply_filter(const CVar& spec, const Var& gains);
// S[c, c'] = Re Σ_bins a[c]·conj(b[c']), returned with shape (1, C, C).
Var channel_correlation(const CVar& a, const CVar& b);
// out[c] = Σ_c' A[c, c']·x[c'] for A of shape (1, C, C).
CVar channel_mix(const Var& attention, const CVar& x);
// Charbonnier over the real and imaginary parts stacked as 2N real values.
Var charbonnier(const CVar& x, const CVar& t, double eps);

}  // namespace fcenet::ag
