#include "mulab/data/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "mulab/error.hpp"
#include "mulab/tensor.hpp"

namespace mulab::data {

std::size_t LabeledDataset::feature_size() const noexcept { return shape_product(feature_shape); }

bool LabeledDataset::has_unknown_labels() const noexcept {
    for (const auto& s : samples) {
        for (auto b : s.labels) {
            if (b == LabelBit::Unknown) return true;
        }
    }
    return false;
}

void validate(const LabeledDataset& ds, bool require_known) {
    if (ds.task.count == 0) throw DataError("task must have at least one class or label");
    if (ds.feature_shape.empty()) throw DataError("dataset has no feature shape");
    const std::size_t fs = ds.feature_size();
    if (fs == 0) throw DataError("feature shape has a zero dimension");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        const std::string where = "sample " + std::to_string(s.id);
        if (!seen.insert(s.id).second) throw DataError("duplicate sample id " + std::to_string(s.id));
        if (s.features.size() != fs) throw DataError(where + ": feature length does not match feature shape");
        for (float v : s.features) {
            if (!(v >= 0.0f && v <= 1.0f)) throw DataError(where + ": feature value outside [0, 1]");
        }
        if (ds.task.is_single()) {
            if (s.class_index >= ds.task.count) throw DataError(where + ": class index out of range");
            if (!s.labels.empty()) throw DataError(where + ": single-label sample carries a label vector");
        } else {
            if (s.labels.size() != ds.task.count) throw DataError(where + ": label vector has wrong length");
            for (auto b : s.labels) {
                if (b != LabelBit::Negative && b != LabelBit::Positive && b != LabelBit::Unknown) {
                    throw DataError(where + ": invalid label entry");
                }
                if (require_known && b == LabelBit::Unknown) {
                    throw DataError(where + ": Unknown label remains; apply the U-one policy first");
                }
            }
        }
    }
}

std::vector<LabelBit> apply_u_one(std::span<const LabelBit> labels) {
    std::vector<LabelBit> out(labels.begin(), labels.end());
    for (auto& b : out) {
        if (b == LabelBit::Unknown) b = LabelBit::Positive;
    }
    return out;
}

LabeledDataset apply_u_one(LabeledDataset ds) {
    for (auto& s : ds.samples) s.labels = apply_u_one(s.labels);
    return ds;
}

std::unordered_map<std::uint64_t, std::size_t> index_by_id(const LabeledDataset& ds) {
    std::unordered_map<std::uint64_t, std::size_t> idx;
    idx.reserve(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) idx.emplace(ds.samples[i].id, i);
    return idx;
}

std::vector<std::uint64_t> sample_ids(const LabeledDataset& ds) {
    std::vector<std::uint64_t> ids;
    ids.reserve(ds.samples.size());
    for (const auto& s : ds.samples) ids.push_back(s.id);
    return ids;
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::uint64_t> ids) {
    const auto idx = index_by_id(ds);
    LabeledDataset out;
    out.task = ds.task;
    out.feature_shape = ds.feature_shape;
    out.provenance = ds.provenance;
    out.samples.reserve(ids.size());
    for (auto id : ids) {
        const auto it = idx.find(id);
        if (it == idx.end()) throw DataError("subset: unknown sample id " + std::to_string(id));
        out.samples.push_back(ds.samples[it->second]);
    }
    return out;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
    if (!(a.task == b.task)) throw DataError("cannot combine datasets with different task kinds");
    if (a.feature_shape != b.feature_shape) throw DataError("cannot combine datasets with different feature shapes");
    LabeledDataset out = a;
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    return out;
}

}  // namespace mulab::data
