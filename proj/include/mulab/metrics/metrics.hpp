#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mulab/data/dataset.hpp"
#include "mulab/nn/model.hpp"

namespace mulab::metrics {

// Mann-Whitney AUROC: the fraction of (positive, negative) pairs in which the
// positive scores higher, ties counting one half. Computed exactly from
// mid-ranks. Empty when the labels lack a positive or a negative.
std::optional<double> auroc_binary(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct EvalResult {
    std::string set_name;
    double macro_auroc = 0.0;                    // NaN when no class is evaluable
    std::map<std::size_t, double> per_class;     // evaluable classes only
    std::map<std::uint8_t, double> per_group;    // macro AUROC restricted to each group
    std::size_t n_samples = 0;
    std::size_t skipped_classes = 0;             // classes lacking a positive or a negative

    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

// Class-membership probabilities (softmax or per-label sigmoid) from an
// eval-mode forward pass, row-major (samples, classes).
std::vector<double> predict_proba(const nn::ModelState& model, const data::LabeledDataset& ds);

// One-vs-rest AUROC per class for single-label data, per-label AUROC for
// multi-label data (which must not contain Unknown entries).
EvalResult evaluate_probabilities(std::span<const double> probs, const data::LabeledDataset& ds,
                                  std::string set_name = {});

EvalResult evaluate(const nn::ModelState& model, const data::LabeledDataset& ds, std::string set_name = {});

struct DifficultyRanking {
    std::vector<std::size_t> order;  // easiest (highest AUROC) first
    std::size_t easy = 0;
    std::size_t intermediate = 0;
    std::size_t hard = 0;

    friend bool operator==(const DifficultyRanking&, const DifficultyRanking&) = default;
};

// Descending AUROC, ties broken by ascending class index. Representatives are
// the first, middle ((n - 1) / 2) and last entries. Needs >= 3 classes.
DifficultyRanking rank_difficulty(const std::map<std::size_t, double>& per_class_auroc);
DifficultyRanking rank_difficulty(const nn::ModelState& pretrained, const data::LabeledDataset& test);

}  // namespace mulab::metrics
