#pragma once

#include <span>
#include <vector>

#include "fcenet/tensor.hpp"

namespace fcenet {

enum class ConvKind { standard, pointwise, depthwise, strided_down };

// Geometry of a convolution. Weights are laid out [out][in][ky][kx]; for
// depthwise layers [channel][ky][kx].
struct ConvSpec {
    ConvKind kind = ConvKind::standard;
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;

    static ConvSpec standard(int in, int out, int kernel = 3) {
        return {ConvKind::standard, in, out, kernel, 1};
    }
    static ConvSpec pointwise(int in, int out) { return {ConvKind::pointwise, in, out, 1, 1}; }
    static ConvSpec depthwise(int channels, int kernel = 3) {
        return {ConvKind::depthwise, channels, channels, kernel, 1};
    }
    static ConvSpec strided_down(int in, int out) { return {ConvKind::strided_down, in, out, 3, 2}; }

    std::size_t weight_count() const;
    std::size_t bias_count() const { return static_cast<std::size_t>(out_channels); }
    std::size_t param_count() const { return weight_count() + bias_count(); }
    int fan_in() const;
    // Throws std::invalid_argument for even kernels or inconsistent kind fields.
    void validate() const;
    Shape output_shape(const Shape& in) const;
};

struct ConvParams {
    ConvSpec spec;
    std::vector<double> weights;
    std::vector<double> bias;
};

Tensor conv2d(const ConvParams& params, const Tensor& input);

// Raw kernels shared with the differentiable layer.
Tensor conv2d_forward(const ConvSpec& spec, std::span<const double> weights,
                      std::span<const double> bias, const Tensor& input);
// Accumulates into grad_input / grad_weights / grad_bias; any may be null.
void conv2d_backward(const ConvSpec& spec, std::span<const double> weights, const Tensor& input,
                     const Tensor& grad_output, Tensor* grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias);

inline constexpr double kLayerNormEps = 1e-6;

// Normalizes over channels at each spatial position.
Tensor layer_norm(const Tensor& input, std::span<const double> gamma, std::span<const double> beta,
                  double eps = kLayerNormEps);

std::vector<double> global_avg_pool(const Tensor& input);

// Two affine layers with GELU between them. Matrices are row-major [out][in].
struct MlpParams {
    int in = 0;
    int hidden = 0;
    int out = 0;
    std::vector<double> w1, b1, w2, b2;
};

std::vector<double> mlp_forward(const MlpParams& mlp, std::span<const double> input);

std::vector<double> softmax(std::span<const double> logits);

double gelu(double x);
double gelu_derivative(double x);
Tensor gelu(const Tensor& input);

double sigmoid(double x);

}  // namespace fcenet
