#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccswap/error.hpp"

namespace ccswap {

// Row-major dense matrix used for attention maps and projections.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Shape3 {
    int channels = 0;
    int height   = 0;
    int width    = 0;

    std::size_t numel() const { return static_cast<std::size_t>(channels) * height * width; }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    bool operator==(const Shape3&) const = default;

    std::string str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }
};

// Channel-major (C, H, W) array of doubles. The tag keeps latents and pixel
// images from being mixed up at compile time.
template <class Tag>
class Grid3 {
public:
    Grid3() = default;
    explicit Grid3(Shape3 shape, double fill = 0.0) : shape_(shape), data_(shape.numel(), fill) {
        if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
            throw ShapeError("non-positive dimensions " + shape.str());
        }
    }
    Grid3(Shape3 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) {
            throw ShapeError("buffer of " + std::to_string(data_.size()) + " values does not match " + shape_.str());
        }
    }

    const Shape3& shape() const { return shape_; }
    int channels() const { return shape_.channels; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    std::size_t size() const { return data_.size(); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    bool operator==(const Grid3& other) const = default;

    std::size_t index(int c, int y, int x) const {
        return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Shape3 shape_{};
    std::vector<double> data_;
};

struct LatentTag {};
struct PixelTag {};

using Latent = Grid3<LatentTag>;
using Image  = Grid3<PixelTag>;

template <class Tag>
void require_same_shape(const Grid3<Tag>& a, const Grid3<Tag>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

// out = a + scale * b
template <class Tag>
Grid3<Tag> axpy(const Grid3<Tag>& a, double scale, const Grid3<Tag>& b) {
    require_same_shape(a, b, "axpy");
    Grid3<Tag> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * b[i];
    return out;
}

template <class Tag>
double max_abs_diff(const Grid3<Tag>& a, const Grid3<Tag>& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace ccswap
