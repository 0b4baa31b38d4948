#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mulab/nn/arch.hpp"
#include "mulab/tensor.hpp"

namespace mulab::nn {

enum class ParamRole : std::uint8_t { Weight, Bias, Scale, Shift };

std::string role_name(ParamRole role);

// One contiguous slice of the flat parameter vector.
struct ParamRecord {
    std::size_t layer_index = 0;
    ParamRole role = ParamRole::Weight;
    std::size_t offset = 0;
    std::size_t length = 0;
    friend bool operator==(const ParamRecord&, const ParamRecord&) = default;
};

// Running mean/variance of one BatchNorm layer. Not trainable.
struct RunningStats {
    std::size_t layer_index = 0;
    std::vector<double> mean;
    std::vector<double> var;
    friend bool operator==(const RunningStats&, const RunningStats&) = default;
};

// Layout order: layers in sequence; within a layer weight then bias (Dense,
// Conv2D) or scale then shift (BatchNorm). Dense weights are (out, in)
// row-major; Conv2D weights are (out, in, k, k).
std::vector<ParamRecord> build_layout(const ArchSpec& arch);

struct ModelState {
    ArchSpec arch;
    std::vector<double> params;
    std::vector<ParamRecord> layout;
    std::vector<RunningStats> bn_stats;

    [[nodiscard]] std::size_t num_params() const noexcept { return params.size(); }
    // Slice of params for (layer, role); throws if the layer has no such role.
    [[nodiscard]] const ParamRecord& record(std::size_t layer_index, ParamRole role) const;

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct GradientVector {
    std::vector<double> values;
    friend bool operator==(const GradientVector&, const GradientVector&) = default;
};

enum class Mode { Train, Eval };
enum class LossKind { CrossEntropy, BinaryCrossEntropy };

std::string loss_kind_name(LossKind kind);

// Supervision for one batch: class indices for cross-entropy, or a row-major
// (batch, num_labels) 0/1 matrix for binary cross-entropy.
struct Targets {
    LossKind kind = LossKind::CrossEntropy;
    std::vector<std::uint32_t> classes;
    std::vector<std::uint8_t> bits;
    std::size_t num_labels = 0;

    static Targets single(std::vector<std::uint32_t> classes);
    static Targets multi(std::vector<std::uint8_t> bits, std::size_t num_labels);
    [[nodiscard]] std::size_t batch_size() const noexcept;
};

// Kaiming-uniform (fan-in, ReLU gain) weights, zero biases, BatchNorm
// scale 1 / shift 0, running mean 0 / var 1. Deterministic in (arch, seed).
ModelState init_model(const ArchSpec& arch, std::uint64_t seed);

// Same architecture and running statistics, different parameters.
ModelState clone_with_params(const ModelState& model, std::vector<double> new_params);

// Logits of shape (batch, output_dim). Train mode normalizes with batch
// statistics but does not touch running statistics.
Tensor forward(const ModelState& model, const Tensor& batch, Mode mode);

// Per-BatchNorm-layer statistics observed on one training batch; the
// variance is unbiased (n / (n - 1)), or biased when n == 1.
struct BatchStats {
    std::size_t layer_index = 0;
    std::vector<double> mean;
    std::vector<double> var;
};

struct LossAndGrad {
    double loss = 0.0;
    GradientVector grad;
    std::vector<BatchStats> batch_stats;  // empty in eval mode
};

// Mean loss over the batch (and over label positions for BCE) and its
// gradient in ModelState layout.
LossAndGrad loss_and_grad(const ModelState& model, const Tensor& batch, const Targets& targets, LossKind kind,
                          Mode mode = Mode::Train);

// running <- (1 - momentum) * running + momentum * batch
void apply_batch_stats(ModelState& model, const std::vector<BatchStats>& stats);

// Loss only, for finite-difference checks.
double loss_value(const ModelState& model, const Tensor& batch, const Targets& targets, LossKind kind,
                  Mode mode = Mode::Train);

}  // namespace mulab::nn
