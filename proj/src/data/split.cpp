#include "mulab/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "mulab/error.hpp"
#include "mulab/rng.hpp"

namespace mulab::data {

namespace {

// patient id -> sorted sample ids, for the samples whose ids are in `ids`
// (or all samples when ids is null).
std::map<std::uint64_t, std::vector<std::uint64_t>> group_by_patient(const LabeledDataset& ds,
                                                                     const std::vector<std::uint64_t>* ids) {
    std::map<std::uint64_t, std::vector<std::uint64_t>> groups;
    if (ids) {
        const auto idx = index_by_id(ds);
        for (auto id : *ids) {
            const auto it = idx.find(id);
            if (it == idx.end()) throw DataError("split refers to unknown sample id " + std::to_string(id));
            groups[ds.samples[it->second].patient_id].push_back(id);
        }
    } else {
        for (const auto& s : ds.samples) groups[s.patient_id].push_back(s.id);
    }
    for (auto& [p, v] : groups) std::sort(v.begin(), v.end());
    return groups;
}

std::vector<std::uint64_t> sorted(std::vector<std::uint64_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::string grouping_name(Grouping g) { return g == Grouping::SampleLevel ? "sample_level" : "patient_level"; }

Grouping grouping_from_name(const std::string& name) {
    if (name == "sample_level") return Grouping::SampleLevel;
    if (name == "patient_level") return Grouping::PatientLevel;
    throw ConfigError("grouping must be \"sample_level\" or \"patient_level\", got \"" + name + "\"");
}

SplitPlan split_train_val_test(const LabeledDataset& ds, const SplitFractions& f, std::uint64_t seed,
                               bool allow_empty) {
    const double parts[3] = {f.train, f.val, f.test};
    for (double p : parts) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
        if (p == 0.0 && !allow_empty) throw ConfigError("split fractions must be positive unless empty splits are allowed");
    }
    if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    if (ds.empty()) throw DataError("cannot split an empty dataset");

    const auto groups = group_by_patient(ds, nullptr);
    std::vector<std::uint64_t> patients;
    for (const auto& [p, ids] : groups) patients.push_back(p);
    Rng rng(seed);
    rng.shuffle(patients);

    SplitPlan plan;
    plan.seed = seed;
    const double total = static_cast<double>(ds.size());
    std::size_t before = 0;
    for (auto p : patients) {
        const auto& ids = groups.at(p);
        const double mid = (static_cast<double>(before) + 0.5 * static_cast<double>(ids.size())) / total;
        before += ids.size();
        auto& dest = mid < f.train ? plan.train_ids : (mid < f.train + f.val ? plan.val_ids : plan.test_ids);
        dest.insert(dest.end(), ids.begin(), ids.end());
    }
    const std::vector<std::uint64_t>* splits[3] = {&plan.train_ids, &plan.val_ids, &plan.test_ids};
    for (int i = 0; i < 3; ++i) {
        if (splits[i]->empty() && (parts[i] > 0.0 || !allow_empty)) {
            throw DataError("too few patients (" + std::to_string(patients.size()) + ") to populate every split");
        }
    }
    plan.train_ids = sorted(std::move(plan.train_ids));
    plan.val_ids = sorted(std::move(plan.val_ids));
    plan.test_ids = sorted(std::move(plan.test_ids));
    plan.retain_ids = plan.train_ids;
    return plan;
}

SplitPlan split_forget_retain(const LabeledDataset& ds, SplitPlan plan, double fraction, Grouping grouping,
                              std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("forget fraction must lie in (0, 1)");
    if (plan.train_ids.empty()) throw DataError("split plan has an empty train set");
    const std::size_t n_train = plan.train_ids.size();
    Rng rng(seed);
    std::vector<std::uint64_t> forget;

    if (grouping == Grouping::SampleLevel) {
        std::vector<std::uint64_t> ids = sorted(plan.train_ids);
        rng.shuffle(ids);
        const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_train)));
        forget.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(count, n_train)));
    } else {
        const auto groups = group_by_patient(ds, &plan.train_ids);
        std::vector<std::uint64_t> patients;
        for (const auto& [p, ids] : groups) patients.push_back(p);
        rng.shuffle(patients);
        const double target = fraction * static_cast<double>(n_train);
        for (auto p : patients) {
            if (static_cast<double>(forget.size()) >= target) break;
            const auto& ids = groups.at(p);
            forget.insert(forget.end(), ids.begin(), ids.end());
        }
    }
    if (forget.empty()) throw DataError("forget fraction yields an empty forget set");
    if (forget.size() >= n_train) throw DataError("forget fraction yields an empty retain set");

    plan.forget_ids = sorted(std::move(forget));
    plan.retain_ids.clear();
    std::set_difference(plan.train_ids.begin(), plan.train_ids.end(), plan.forget_ids.begin(), plan.forget_ids.end(),
                        std::back_inserter(plan.retain_ids));
    plan.forget_fraction = fraction;
    plan.grouping = grouping;
    plan.seed = seed;
    return plan;
}

void check_plan(const LabeledDataset& ds, const SplitPlan& plan) {
    std::unordered_map<std::uint64_t, int> where;
    const std::vector<std::uint64_t>* splits[3] = {&plan.train_ids, &plan.val_ids, &plan.test_ids};
    for (int i = 0; i < 3; ++i) {
        for (auto id : *splits[i]) {
            if (!where.emplace(id, i).second) throw DataError("sample " + std::to_string(id) + " is in two splits");
        }
    }
    std::unordered_set<std::uint64_t> train(plan.train_ids.begin(), plan.train_ids.end());
    std::unordered_set<std::uint64_t> forget;
    for (auto id : plan.forget_ids) {
        if (!train.count(id)) throw DataError("forget id " + std::to_string(id) + " is not in train");
        if (!forget.insert(id).second) throw DataError("duplicate forget id");
    }
    std::size_t retained = 0;
    for (auto id : plan.retain_ids) {
        if (!train.count(id)) throw DataError("retain id " + std::to_string(id) + " is not in train");
        if (forget.count(id)) throw DataError("sample " + std::to_string(id) + " is in both forget and retain");
        ++retained;
    }
    if (retained + forget.size() != train.size()) throw DataError("forget and retain do not cover train");

    // Patient integrity: one split per patient; under patient-level forgetting,
    // one side of forget/retain per patient.
    const auto idx = index_by_id(ds);
    std::unordered_map<std::uint64_t, int> patient_split;
    std::unordered_map<std::uint64_t, bool> patient_forget;
    for (const auto& [id, split] : where) {
        const auto it = idx.find(id);
        if (it == idx.end()) throw DataError("plan refers to unknown sample id " + std::to_string(id));
        const auto pid = ds.samples[it->second].patient_id;
        const auto [pit, fresh] = patient_split.emplace(pid, split);
        if (!fresh && pit->second != split) {
            throw DataError("patient " + std::to_string(pid) + " spans two of train/val/test");
        }
        if (split == 0 && plan.grouping == Grouping::PatientLevel) {
            const bool f = forget.count(id) > 0;
            const auto [fit, ffresh] = patient_forget.emplace(pid, f);
            if (!ffresh && fit->second != f) {
                throw DataError("patient " + std::to_string(pid) + " spans forget and retain");
            }
        }
    }
}

}  // namespace mulab::data
