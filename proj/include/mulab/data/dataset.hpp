#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mulab::data {

enum class TaskType : std::uint8_t { SingleLabel = 0, MultiLabel = 1 };

struct TaskKind {
    TaskType type = TaskType::SingleLabel;
    std::size_t count = 0;  // classes (single-label) or labels (multi-label)

    static TaskKind single(std::size_t num_classes) { return {TaskType::SingleLabel, num_classes}; }
    static TaskKind multi(std::size_t num_labels) { return {TaskType::MultiLabel, num_labels}; }
    [[nodiscard]] bool is_single() const noexcept { return type == TaskType::SingleLabel; }
    friend bool operator==(const TaskKind&, const TaskKind&) = default;
};

enum class LabelBit : std::uint8_t { Negative = 0, Positive = 1, Unknown = 2 };

struct Sample {
    std::uint64_t id = 0;
    std::vector<float> features;       // C*H*W values in [0, 1]
    std::uint32_t class_index = 0;     // single-label tasks
    std::vector<LabelBit> labels;      // multi-label tasks
    std::uint64_t patient_id = 0;
    std::uint8_t group = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledDataset {
    TaskKind task;
    std::vector<std::size_t> feature_shape;  // {C, H, W} or {D}
    std::vector<Sample> samples;
    std::string provenance;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] std::size_t feature_size() const noexcept;
    [[nodiscard]] bool has_unknown_labels() const noexcept;

    // Provenance is descriptive and does not take part in equality.
    friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
        return a.task == b.task && a.feature_shape == b.feature_shape && a.samples == b.samples;
    }
};

// Throws DataError on duplicate ids, bad feature lengths or ranges, or labels
// outside the task. With require_known, multi-label Unknown entries are rejected.
void validate(const LabeledDataset& ds, bool require_known = false);

// U-one policy: every Unknown becomes Positive, known entries are kept.
std::vector<LabelBit> apply_u_one(std::span<const LabelBit> labels);
LabeledDataset apply_u_one(LabeledDataset ds);

// Samples with the given ids, in the given order. Throws on unknown ids.
LabeledDataset subset(const LabeledDataset& ds, std::span<const std::uint64_t> ids);

// a's samples followed by b's. Tasks and feature shapes must agree.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

std::unordered_map<std::uint64_t, std::size_t> index_by_id(const LabeledDataset& ds);

std::vector<std::uint64_t> sample_ids(const LabeledDataset& ds);

}  // namespace mulab::data
