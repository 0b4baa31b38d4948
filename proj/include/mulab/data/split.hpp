#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mulab/data/dataset.hpp"

namespace mulab::data {

enum class Grouping { SampleLevel, PatientLevel };

std::string grouping_name(Grouping g);
Grouping grouping_from_name(const std::string& name);

// Disjoint train/val/test id sets plus the forget/retain partition of train.
// Every id list is sorted ascending.
struct SplitPlan {
    std::vector<std::uint64_t> train_ids;
    std::vector<std::uint64_t> val_ids;
    std::vector<std::uint64_t> test_ids;
    std::vector<std::uint64_t> forget_ids;
    std::vector<std::uint64_t> retain_ids;
    double forget_fraction = 0.0;
    Grouping grouping = Grouping::PatientLevel;
    std::uint64_t seed = 0;

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

// Patient-level assignment: patients are shuffled with the seed, laid end to
// end by sample count, and each patient goes to the split containing the
// midpoint of its run. The forget set is left empty (retain == train).
// Zero fractions are accepted only with allow_empty; otherwise every split
// must receive at least one patient.
SplitPlan split_train_val_test(const LabeledDataset& ds, const SplitFractions& fractions, std::uint64_t seed,
                               bool allow_empty = false);

// Moves part of train into the forget set.
//   SampleLevel:  exactly round(fraction * |train|) ids chosen by seeded shuffle.
//   PatientLevel: whole patients in seeded order until the forget count first
//                 reaches fraction * |train|.
// Throws DataError if forget or retain would be empty.
SplitPlan split_forget_retain(const LabeledDataset& ds, SplitPlan plan, double fraction, Grouping grouping,
                              std::uint64_t seed);

// Throws DataError describing the first violated partition invariant.
void check_plan(const LabeledDataset& ds, const SplitPlan& plan);

}  // namespace mulab::data
