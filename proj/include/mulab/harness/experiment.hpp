#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mulab/data/dataset.hpp"
#include "mulab/harness/config.hpp"
#include "mulab/harness/report.hpp"
#include "mulab/metrics/metrics.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::harness {

// Seeds of one repeat. Every stream is derive_seed(base_seed, {tag, repeat,
// ...}), so cells never share or perturb each other's streams. The
// train/val/test split is the exception: like a benchmark's published split
// it is fixed across repeats, derived from base_seed alone.
struct RepeatSeeds {
    std::uint64_t split = 0;
    std::uint64_t init = 0;
    std::uint64_t train = 0;
};

RepeatSeeds repeat_seeds(std::uint64_t base_seed, std::size_t repeat);
std::uint64_t forget_seed(std::uint64_t base_seed, std::size_t repeat, double fraction);
std::uint64_t exact_init_seed(std::uint64_t base_seed, std::size_t repeat, double fraction);
std::uint64_t exact_train_seed(std::uint64_t base_seed, std::size_t repeat, double fraction);
// Shared by relabel and salun so both see the same noisy labels and batch order.
std::uint64_t unlearn_run_seed(std::uint64_t base_seed, std::size_t repeat, double fraction);

struct SweepOutcome {
    unlearn::UnlearnConfig best_cfg;
    nn::ModelState best_model;
    std::vector<SweepPoint> table;
    std::size_t best_index = 0;
    std::size_t best_mask_ones = 0;
    double seconds = 0.0;       // every grid point, evaluation excluded
    double best_seconds = 0.0;  // the selected grid point alone
};

// Runs every grid point (lr x threshold for salun, lr for relabel) from
// base_cfg and keeps the one whose forget macro AUROC is closest to the exact
// reference; ties go to higher test AUROC, then lower lr, then lower threshold.
// Throws Error when every grid point fails.
SweepOutcome sweep_hparams(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                           const data::LabeledDataset& retain, const data::LabeledDataset& test,
                           unlearn::Algorithm algorithm, const SweepGrid& grid,
                           const metrics::EvalResult& exact_forget, const unlearn::UnlearnConfig& base_cfg);

// Index of the winning point under the selection rule; failed points never win.
std::size_t select_sweep_point(const std::vector<SweepPoint>& points);

data::LabeledDataset load_experiment_data(const ExperimentConfig& cfg);

UnlearnReport run_experiment(const ExperimentConfig& cfg);

}  // namespace mulab::harness
