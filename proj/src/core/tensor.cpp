#include "mulab/tensor.hpp"

#include <cmath>
#include <numeric>

#include "mulab/error.hpp"

namespace mulab {

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape_));
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape_));
    }
    if (shape_product(shape_) != values_.size()) {
        throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
    }
}

std::size_t Tensor::row_size() const noexcept {
    if (shape_.empty()) return 0;
    return values_.size() / shape_[0];
}

void Tensor::reshape(std::vector<std::size_t> shape) {
    if (shape_product(shape) != values_.size()) {
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    shape_ = std::move(shape);
}

bool Tensor::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace mulab
