#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mulab {

// Dense row-major array of doubles. Activations, batches and logits all use it.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    [[nodiscard]] const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double* data() noexcept { return values_.data(); }
    [[nodiscard]] const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    // Product of all dimensions after the first (per-sample element count).
    [[nodiscard]] std::size_t row_size() const noexcept;

    // Reinterpret the shape; element count must be preserved.
    void reshape(std::vector<std::size_t> shape);

    [[nodiscard]] bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept;
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace mulab
