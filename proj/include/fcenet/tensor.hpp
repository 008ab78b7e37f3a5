#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcenet {

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t numel() const { return plane() * channels; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

// Real C×H×W array, row-major in (c, y, x). Images, feature maps, and flat
// parameter blobs all use this type; vectors are (n, 1, 1).
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);
    Tensor(int channels, int height, int width, double fill = 0.0)
        : Tensor(Shape{channels, height, width}, fill) {}

    static Tensor vector(std::vector<double> values);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const Shape& shape() const { return shape_; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
    double operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> channel(int c) { return {data_.data() + c * shape_.plane(), shape_.plane()}; }
    std::span<const double> channel(int c) const {
        return {data_.data() + c * shape_.plane(), shape_.plane()};
    }
    std::vector<double>& storage() { return data_; }

    void fill(double v);
    bool all_finite() const;
    Tensor reshaped(Shape s) const;

    Tensor& operator+=(const Tensor& o);
    Tensor& operator-=(const Tensor& o);
    Tensor& operator*=(double s);

   private:
    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
    }

    Shape shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
double max_abs_diff(const Tensor& a, const Tensor& b);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Channel slicing and concatenation along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& t, int begin, int count);
Tensor replicate_channels(const Tensor& t, int channels);

}  // namespace fcenet
