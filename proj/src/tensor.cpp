#include "fcenet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace fcenet {

std::string to_string(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
           std::to_string(s.width);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
    if (shape.channels < 0 || shape.height < 0 || shape.width < 0) {
        throw ShapeError("negative tensor dimension: " + to_string(shape));
    }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.numel()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + to_string(shape));
    }
}

Tensor Tensor::vector(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor(Shape{n, 1, 1}, std::move(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape s) const { return Tensor(s, data_); }

Tensor& Tensor::operator+=(const Tensor& o) {
    require_same_shape(*this, o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
    require_same_shape(*this, o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("concat_channels: spatial mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
    Tensor out(a.channels() + b.channels(), a.height(), a.width());
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
    return out;
}

Tensor slice_channels(const Tensor& t, int begin, int count) {
    if (begin < 0 || count < 0 || begin + count > t.channels()) {
        throw ShapeError("slice_channels: range out of bounds for " + to_string(t.shape()));
    }
    Tensor out(count, t.height(), t.width());
    const auto plane = t.shape().plane();
    std::copy_n(t.data().begin() + begin * plane, count * plane, out.data().begin());
    return out;
}

Tensor replicate_channels(const Tensor& t, int channels) {
    if (t.channels() != 1) throw ShapeError("replicate_channels: expects a single-channel tensor");
    Tensor out(channels, t.height(), t.width());
    for (int c = 0; c < channels; ++c) std::ranges::copy(t.channel(0), out.channel(c).begin());
    return out;
}

}  // namespace fcenet
