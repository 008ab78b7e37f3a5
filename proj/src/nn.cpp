#include "fcenet/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace fcenet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

const char* kind_name(ConvKind k) {
    switch (k) {
        case ConvKind::standard: return "standard";
        case ConvKind::pointwise: return "pointwise";
        case ConvKind::depthwise: return "depthwise";
        case ConvKind::strided_down: return "strided-down";
    }
    return "?";
}

// Unfolds the padded receptive fields into a (in*k*k) × (Ho*Wo) matrix.
// Fills every entry of cols (padding included), so the buffer can be reused
// without clearing.
void im2col(const ConvSpec& spec, const Tensor& in, int out_h, int out_w, std::vector<double>& cols) {
    const int k = spec.kernel;
    const int pad = (k - 1) / 2;
    const int s = spec.stride;
    const int H = in.height();
    const int W = in.width();
    const std::size_t P = static_cast<std::size_t>(out_h) * out_w;
    const std::size_t need = static_cast<std::size_t>(spec.in_channels) * k * k * P;
    if (cols.size() < need) cols.resize(need);
    for (int c = 0; c < spec.in_channels; ++c) {
        const double* src = in.channel(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * P;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * s + ky - pad;
                    double* drow = row + static_cast<std::size_t>(oy) * out_w;
                    if (iy < 0 || iy >= H) {
                        std::fill_n(drow, out_w, 0.0);
                        continue;
                    }
                    const double* srow = src + static_cast<std::size_t>(iy) * W;
                    if (s == 1) {
                        const int x0 = std::max(0, pad - kx);
                        const int x1 = std::min(out_w, W + pad - kx);
                        std::fill_n(drow, x0, 0.0);
                        std::copy(srow + x0 + kx - pad, srow + x1 + kx - pad, drow + x0);
                        std::fill(drow + x1, drow + out_w, 0.0);
                    } else {
                        for (int ox = 0; ox < out_w; ++ox) {
                            const int ix = ox * s + kx - pad;
                            drow[ox] = (ix >= 0 && ix < W) ? srow[ix] : 0.0;
                        }
                    }
                }
            }
        }
    }
}

// Scratch space for column matrices, one per thread.
std::vector<double>& column_buffer() {
    thread_local std::vector<double> buf;
    return buf;
}

void col2im(const ConvSpec& spec, const std::vector<double>& cols, int out_h, int out_w, Tensor& grad_in) {
    const int k = spec.kernel;
    const int pad = (k - 1) / 2;
    const int s = spec.stride;
    const int H = grad_in.height();
    const int W = grad_in.width();
    const std::size_t P = static_cast<std::size_t>(out_h) * out_w;
    for (int c = 0; c < spec.in_channels; ++c) {
        double* dst = grad_in.channel(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row =
                    cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * P;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * s + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    double* drow = dst + static_cast<std::size_t>(iy) * W;
                    const double* srow = row + static_cast<std::size_t>(oy) * out_w;
                    if (s == 1) {
                        const int x0 = std::max(0, pad - kx);
                        const int x1 = std::min(out_w, W + pad - kx);
                        double* d = drow + kx - pad;
                        for (int ox = x0; ox < x1; ++ox) d[ox] += srow[ox];
                    } else {
                        for (int ox = 0; ox < out_w; ++ox) {
                            const int ix = ox * s + kx - pad;
                            if (ix >= 0 && ix < W) drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

Tensor depthwise_forward(const ConvSpec& spec, std::span<const double> weights,
                         std::span<const double> bias, const Tensor& in) {
    const int k = spec.kernel;
    const int pad = (k - 1) / 2;
    const int H = in.height();
    const int W = in.width();
    Tensor out(in.shape());
    for (int c = 0; c < spec.in_channels; ++c) {
        const double* src = in.channel(c).data();
        double* dst = out.channel(c).data();
        std::fill_n(dst, out.shape().plane(), bias[c]);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double wv = weights[(static_cast<std::size_t>(c) * k + ky) * k + kx];
                const int x0 = std::max(0, pad - kx);
                const int x1 = std::min(W, W + pad - kx);
                for (int y = 0; y < H; ++y) {
                    const int iy = y + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const double* srow = src + static_cast<std::size_t>(iy) * W + kx - pad;
                    double* drow = dst + static_cast<std::size_t>(y) * W;
                    for (int x = x0; x < x1; ++x) drow[x] += wv * srow[x];
                }
            }
        }
    }
    return out;
}

void depthwise_backward(const ConvSpec& spec, std::span<const double> weights, const Tensor& in,
                        const Tensor& gout, Tensor* gin, std::span<double> gw, std::span<double> gb) {
    const int k = spec.kernel;
    const int pad = (k - 1) / 2;
    const int H = in.height();
    const int W = in.width();
    for (int c = 0; c < spec.in_channels; ++c) {
        const double* src = in.channel(c).data();
        const double* g = gout.channel(c).data();
        if (!gb.empty()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < gout.shape().plane(); ++i) acc += g[i];
            gb[c] += acc;
        }
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const std::size_t widx = (static_cast<std::size_t>(c) * k + ky) * k + kx;
                const int x0 = std::max(0, pad - kx);
                const int x1 = std::min(W, W + pad - kx);
                double acc = 0.0;
                for (int y = 0; y < H; ++y) {
                    const int iy = y + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    const double* srow = src + static_cast<std::size_t>(iy) * W + kx - pad;
                    const double* grow = g + static_cast<std::size_t>(y) * W;
                    if (gin != nullptr) {
                        double* irow = gin->channel(c).data() + static_cast<std::size_t>(iy) * W + kx - pad;
                        for (int x = x0; x < x1; ++x) irow[x] += weights[widx] * grow[x];
                    }
                    for (int x = x0; x < x1; ++x) acc += grow[x] * srow[x];
                }
                if (!gw.empty()) gw[widx] += acc;
            }
        }
    }
}

}  // namespace

std::size_t ConvSpec::weight_count() const {
    const std::size_t kk = static_cast<std::size_t>(kernel) * kernel;
    if (kind == ConvKind::depthwise) return static_cast<std::size_t>(in_channels) * kk;
    return static_cast<std::size_t>(in_channels) * out_channels * kk;
}

int ConvSpec::fan_in() const {
    return (kind == ConvKind::depthwise ? 1 : in_channels) * kernel * kernel;
}

void ConvSpec::validate() const {
    if (in_channels <= 0 || out_channels <= 0) throw std::invalid_argument("conv: non-positive channel count");
    if (kernel <= 0 || kernel % 2 == 0) {
        throw std::invalid_argument("conv: kernel must be odd, got " + std::to_string(kernel));
    }
    if (stride <= 0) throw std::invalid_argument("conv: stride must be positive");
    switch (kind) {
        case ConvKind::pointwise:
            if (kernel != 1 || stride != 1) throw std::invalid_argument("conv: pointwise requires 1x1, stride 1");
            break;
        case ConvKind::depthwise:
            if (in_channels != out_channels) {
                throw std::invalid_argument("conv: depthwise requires in_channels == out_channels");
            }
            if (stride != 1) throw std::invalid_argument("conv: depthwise requires stride 1");
            break;
        case ConvKind::strided_down:
            if (stride != 2) throw std::invalid_argument("conv: strided-down requires stride 2");
            break;
        case ConvKind::standard: break;
    }
}

Shape ConvSpec::output_shape(const Shape& in) const {
    if (in.channels != in_channels) {
        throw ShapeError(std::string("conv (") + kind_name(kind) + "): input has " +
                         std::to_string(in.channels) + " channels, expected " +
                         std::to_string(in_channels));
    }
    if (in.height % stride != 0 || in.width % stride != 0) {
        throw ShapeError("conv: spatial size " + to_string(in) + " not divisible by stride " +
                         std::to_string(stride));
    }
    return {out_channels, in.height / stride, in.width / stride};
}

Tensor conv2d_forward(const ConvSpec& spec, std::span<const double> weights,
                      std::span<const double> bias, const Tensor& input) {
    spec.validate();
    const Shape os = spec.output_shape(input.shape());
    if (weights.size() != spec.weight_count() || bias.size() != spec.bias_count()) {
        throw ShapeError("conv: parameter length does not match geometry");
    }
    if (spec.kind == ConvKind::depthwise) return depthwise_forward(spec, weights, bias, input);

    Tensor out(os);
    const auto P = static_cast<Eigen::Index>(os.plane());
    const auto K = static_cast<Eigen::Index>(spec.in_channels) * spec.kernel * spec.kernel;
    ConstMatMap w(weights.data(), spec.out_channels, K);
    MatMap y(out.data().data(), spec.out_channels, P);
    if (spec.kernel == 1 && spec.stride == 1) {
        y.noalias() = w * ConstMatMap(input.data().data(), K, P);
    } else {
        std::vector<double>& cols = column_buffer();
        im2col(spec, input, os.height, os.width, cols);
        y.noalias() = w * ConstMatMap(cols.data(), K, P);
    }
    for (int c = 0; c < spec.out_channels; ++c) y.row(c).array() += bias[c];
    return out;
}

void conv2d_backward(const ConvSpec& spec, std::span<const double> weights, const Tensor& input,
                     const Tensor& grad_output, Tensor* grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias) {
    if (spec.kind == ConvKind::depthwise) {
        depthwise_backward(spec, weights, input, grad_output, grad_input, grad_weights, grad_bias);
        return;
    }
    const Shape os = grad_output.shape();
    const auto P = static_cast<Eigen::Index>(os.plane());
    const auto K = static_cast<Eigen::Index>(spec.in_channels) * spec.kernel * spec.kernel;
    ConstMatMap w(weights.data(), spec.out_channels, K);
    ConstMatMap gy(grad_output.data().data(), spec.out_channels, P);
    if (!grad_bias.empty()) {
        for (int c = 0; c < spec.out_channels; ++c) grad_bias[c] += gy.row(c).sum();
    }
    const bool direct = spec.kernel == 1 && spec.stride == 1;
    std::vector<double>& cols = column_buffer();
    if (!direct) im2col(spec, input, os.height, os.width, cols);
    ConstMatMap x(direct ? input.data().data() : cols.data(), K, P);
    if (!grad_weights.empty()) {
        MatMap gw(grad_weights.data(), spec.out_channels, K);
        gw.noalias() += gy * x.transpose();
    }
    if (grad_input != nullptr) {
        if (direct) {
            MatMap gx(grad_input->data().data(), K, P);
            gx.noalias() += w.transpose() * gy;
        } else {
            // Reuse the column buffer for the column-space gradient.
            MatMap gc(cols.data(), K, P);
            gc.noalias() = w.transpose() * gy;
            col2im(spec, cols, os.height, os.width, *grad_input);
        }
    }
}

Tensor conv2d(const ConvParams& params, const Tensor& input) {
    return conv2d_forward(params.spec, params.weights, params.bias, input);
}

Tensor layer_norm(const Tensor& input, std::span<const double> gamma, std::span<const double> beta,
                  double eps) {
    const int C = input.channels();
    if (gamma.size() != static_cast<std::size_t>(C) || beta.size() != static_cast<std::size_t>(C)) {
        throw ShapeError("layer_norm: gamma/beta length must equal channel count " + std::to_string(C));
    }
    if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
    Tensor out(input.shape());
    const std::size_t plane = input.shape().plane();
    for (std::size_t p = 0; p < plane; ++p) {
        double mean = 0.0;
        for (int c = 0; c < C; ++c) mean += input.data()[c * plane + p];
        mean /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = input.data()[c * plane + p] - mean;
            var += d * d;
        }
        var /= C;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < C; ++c) {
            out.data()[c * plane + p] = (input.data()[c * plane + p] - mean) * rstd * gamma[c] + beta[c];
        }
    }
    return out;
}

std::vector<double> global_avg_pool(const Tensor& input) {
    std::vector<double> out(input.channels(), 0.0);
    const double n = static_cast<double>(input.shape().plane());
    for (int c = 0; c < input.channels(); ++c) {
        double acc = 0.0;
        for (double v : input.channel(c)) acc += v;
        out[c] = acc / n;
    }
    return out;
}

std::vector<double> mlp_forward(const MlpParams& mlp, std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(mlp.in) ||
        mlp.w1.size() != static_cast<std::size_t>(mlp.hidden) * mlp.in ||
        mlp.b1.size() != static_cast<std::size_t>(mlp.hidden) ||
        mlp.w2.size() != static_cast<std::size_t>(mlp.out) * mlp.hidden ||
        mlp.b2.size() != static_cast<std::size_t>(mlp.out)) {
        throw ShapeError("mlp_forward: dimension mismatch");
    }
    std::vector<double> h(mlp.hidden);
    for (int i = 0; i < mlp.hidden; ++i) {
        double acc = mlp.b1[i];
        for (int j = 0; j < mlp.in; ++j) acc += mlp.w1[i * mlp.in + j] * input[j];
        h[i] = gelu(acc);
    }
    std::vector<double> out(mlp.out);
    for (int i = 0; i < mlp.out; ++i) {
        double acc = mlp.b2[i];
        for (int j = 0; j < mlp.hidden; ++j) acc += mlp.w2[i * mlp.hidden + j] * h[j];
        out[i] = acc;
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) return out;
    const double m = *std::max_element(logits.begin(), logits.end());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - m);
    // Order-independent denominator.
    std::vector<double> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    for (auto& v : out) v /= sum;
    return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Tensor gelu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = gelu(input[i]);
    return out;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace fcenet
