#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mulab/metrics/metrics.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::harness {

// Mean and sample standard deviation in percentage points. With fewer than
// two values std is 0 and single is set.
struct Stat {
    double mean = 0.0;
    double std = 0.0;
    std::size_t n = 0;
    bool single = false;

    friend bool operator==(const Stat&, const Stat&) = default;
};

// values are AUROCs in [0, 1]; non-finite values are ignored.
Stat summarize(const std::vector<double>& values);

struct SetSummary {
    Stat macro;
    std::map<std::string, Stat> per_class;  // keyed by difficulty role: easy, intermediate, hard
    std::map<std::string, Stat> per_group;  // keyed by group name

    friend bool operator==(const SetSummary&, const SetSummary&) = default;
};

struct RunRecord {
    std::size_t repeat = 0;
    std::uint64_t seed = 0;  // init seed for exact, run seed for approximate algorithms
    std::optional<double> lr;
    std::optional<double> threshold;
    std::optional<std::size_t> mask_ones;
    metrics::EvalResult retain;
    metrics::EvalResult forget;
    metrics::EvalResult test;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct CellReport {
    unlearn::Algorithm algorithm = unlearn::Algorithm::Exact;
    double fraction = 0.0;
    std::vector<RunRecord> runs;
    SetSummary retain;
    SetSummary forget;
    SetSummary test;

    friend bool operator==(const CellReport&, const CellReport&) = default;
};

struct PretrainedRecord {
    std::size_t repeat = 0;
    std::uint64_t split_seed = 0;
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    std::size_t test_size = 0;
    metrics::EvalResult test;
    std::optional<metrics::DifficultyRanking> ranking;

    friend bool operator==(const PretrainedRecord&, const PretrainedRecord&) = default;
};

struct SweepPoint {
    unlearn::Algorithm algorithm = unlearn::Algorithm::Relabel;
    double fraction = 0.0;
    std::size_t repeat = 0;
    double lr = 0.0;
    std::optional<double> threshold;
    double retain = 0.0;
    double forget = 0.0;
    double test = 0.0;
    double forget_gap = 0.0;  // |forget - exact forget|, AUROC units
    bool selected = false;
    std::string error;        // non-empty when the grid point failed

    friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct IncompleteCell {
    unlearn::Algorithm algorithm = unlearn::Algorithm::Exact;
    double fraction = 0.0;
    std::size_t repeat = 0;
    std::string error;

    friend bool operator==(const IncompleteCell&, const IncompleteCell&) = default;
};

// stage is "pretrain", "exact", "unlearn" (the selected approximate run) or
// "sweep" (every grid point of one (algorithm, fraction, repeat)).
struct TimingEntry {
    std::string stage;
    std::optional<unlearn::Algorithm> algorithm;
    std::optional<double> fraction;
    std::size_t repeat = 0;
    double seconds = 0.0;

    friend bool operator==(const TimingEntry&, const TimingEntry&) = default;
};

struct EfficiencyRow {
    unlearn::Algorithm algorithm = unlearn::Algorithm::Relabel;
    double fraction = 0.0;
    double run_seconds = 0.0;    // mean over repeats of the selected run
    double exact_seconds = 0.0;  // mean over repeats of exact unlearning
    double ratio = 0.0;          // run_seconds / exact_seconds
    double sweep_seconds = 0.0;  // total over repeats and grid points
    bool faster_than_exact = false;
};

struct UnlearnReport {
    nlohmann::json config;
    std::vector<PretrainedRecord> pretrained;
    std::vector<CellReport> cells;
    std::vector<SweepPoint> sweep;
    std::vector<IncompleteCell> incomplete;
    std::vector<TimingEntry> timing;

    const CellReport* find_cell(unlearn::Algorithm a, double fraction) const;

    friend bool operator==(const UnlearnReport&, const UnlearnReport&) = default;
};

std::vector<EfficiencyRow> efficiency(const UnlearnReport& report);

// Deterministic part of the report (no wall-times).
nlohmann::json report_to_json(const UnlearnReport& report);
// Wall-times and the derived efficiency table.
nlohmann::json timing_to_json(const UnlearnReport& report);
UnlearnReport report_from_json(const nlohmann::json& report, const nlohmann::json& timing = nlohmann::json());

// Tables in percentage points, cells formatted "mean±std".
//   forget_size:  algorithm x (retain, forget, test) per fraction
//   per_class:    algorithm x (retain, forget, test) per difficulty role
//   fairness:     algorithm x (retain, forget, test) per group
//   sweep:        one row per grid point
std::string forget_size_csv(const UnlearnReport& report);
std::string per_class_csv(const UnlearnReport& report, double fraction);
std::string fairness_csv(const UnlearnReport& report, double fraction);
std::string sweep_csv(const UnlearnReport& report);
std::string efficiency_csv(const UnlearnReport& report);

// Writes report.json, timing.json and the CSV tables; returns the written paths.
std::vector<std::filesystem::path> emit_report(const UnlearnReport& report, const std::filesystem::path& dir);
UnlearnReport read_report(const std::filesystem::path& dir);

std::string fraction_label(double fraction);

}  // namespace mulab::harness
