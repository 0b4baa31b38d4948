#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace mulab::nn {

struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    friend bool operator==(const Dense&, const Dense&) = default;
};

// Valid padding, square kernel.
struct Conv2D {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

struct ReLU {
    friend bool operator==(const ReLU&, const ReLU&) = default;
};

// Normalizes channels of (N, C, H, W) or features of (N, D).
struct BatchNorm {
    std::size_t num_features = 0;
    double momentum = 0.1;
    double epsilon = 1e-5;
    friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

struct GlobalAvgPool {
    friend bool operator==(const GlobalAvgPool&, const GlobalAvgPool&) = default;
};

struct Flatten {
    friend bool operator==(const Flatten&, const Flatten&) = default;
};

using Layer = std::variant<Dense, Conv2D, ReLU, BatchNorm, GlobalAvgPool, Flatten>;

std::string layer_name(const Layer& layer);

struct ArchSpec {
    // Per-sample input shape: {D} or {C, H, W}.
    std::vector<std::size_t> input_shape;
    std::vector<Layer> layers;
    std::size_t output_dim = 0;

    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Per-sample shape after each layer (index 0 is the input). Throws ShapeError
// on any incompatibility, including a final shape other than {output_dim}.
std::vector<std::vector<std::size_t>> infer_shapes(const ArchSpec& arch);

void validate(const ArchSpec& arch);

void to_json(nlohmann::json& j, const ArchSpec& arch);
void from_json(const nlohmann::json& j, ArchSpec& arch);

// Sorted-key, whitespace-free JSON text; identical specs give identical strings.
std::string canonical_json(const ArchSpec& arch);
ArchSpec arch_from_json_text(const std::string& text);

}  // namespace mulab::nn
