#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mulab/data/dataset_io.hpp"
#include "mulab/data/split.hpp"
#include "mulab/data/synthetic.hpp"
#include "mulab/error.hpp"
#include "mulab/metrics/metrics.hpp"
#include "mulab/optim/optim.hpp"
#include "support.hpp"

using namespace mulab;
using namespace mulab::data;

namespace {

constexpr LabelBit N = LabelBit::Negative, P = LabelBit::Positive, U = LabelBit::Unknown;

SyntheticSpec small_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.num_patients = 60;
    s.samples_per_patient_min = 1;
    s.samples_per_patient_max = 7;
    s.class_weights = {0.5, 0.3, 0.2};
    s.class_separation = {1.0, 0.8, 0.5};
    s.feature_shape = {1, 8, 8};
    s.seed = seed;
    return s;
}

std::size_t patients_in(const LabeledDataset& ds, const std::vector<std::uint64_t>& ids) {
    const auto idx = index_by_id(ds);
    std::set<std::uint64_t> p;
    for (auto id : ids) p.insert(ds.samples[idx.at(id)].patient_id);
    return p.size();
}

}  // namespace

TEST_CASE("U-one policy") {
    const std::vector<LabelBit> mixed{P, N, U, U, P};
    CHECK(apply_u_one(mixed) == std::vector<LabelBit>{P, N, P, P, P});
    const std::vector<LabelBit> known{N, P, N};
    CHECK(apply_u_one(known) == known);
    CHECK(apply_u_one(std::vector<LabelBit>{U, U, U}) == std::vector<LabelBit>{P, P, P});
    const auto once = apply_u_one(mixed);
    CHECK(apply_u_one(once) == once);
}

TEST_CASE("synthetic generation is deterministic and valid") {
    const auto a = generate_synthetic(small_spec(3));
    const auto b = generate_synthetic(small_spec(3));
    CHECK(a == b);
    CHECK(!(a == generate_synthetic(small_spec(4))));
    CHECK_NOTHROW(validate(a, true));
    std::map<std::uint64_t, std::uint8_t> group_of;
    for (const auto& s : a.samples) {
        const auto [it, fresh] = group_of.emplace(s.patient_id, s.group);
        CHECK(it->second == s.group);
        for (float f : s.features) CHECK(std::abs(f * 255.0f - std::round(f * 255.0f)) < 1e-3f);
    }
}

TEST_CASE("multi-label synthetic data carries Unknown entries when asked") {
    SyntheticSpec s = small_spec(5);
    s.task = TaskKind::multi(5);
    s.class_weights.clear();
    s.label_prevalence = {0.3, 0.4, 0.2, 0.5, 0.35};
    s.class_separation = {1, 1, 1, 1, 1};
    s.unknown_rate = 0.2;
    const auto ds = generate_synthetic(s);
    CHECK(ds.has_unknown_labels());
    CHECK_THROWS_AS(validate(ds, true), DataError);
    CHECK_NOTHROW(validate(apply_u_one(ds), true));
}

TEST_CASE("group proportions follow the binomial bound") {
    SyntheticSpec s = small_spec(6);
    s.num_patients = 10000;
    s.samples_per_patient_max = 1;
    s.feature_shape = {1, 2, 2};
    const auto ds = generate_synthetic(s);
    REQUIRE(ds.size() == 10000);
    const auto females = std::count_if(ds.samples.begin(), ds.samples.end(), [](const Sample& x) { return x.group == 1; });
    CHECK(std::abs(static_cast<double>(females) - 5000.0) <= 3.0 * std::sqrt(10000.0 * 0.25));
}

TEST_CASE("very large separation gives a near-perfect linear classifier") {
    SyntheticSpec s;
    s.num_patients = 400;
    s.samples_per_patient_max = 1;
    s.class_weights = {0.5, 0.5};
    s.task = TaskKind::single(2);
    s.class_separation = {6.0, 6.0};
    s.feature_shape = {1, 6, 6};
    s.seed = 7;
    const auto ds = generate_synthetic(s);
    const auto plan = split_train_val_test(ds, {0.5, 0.0, 0.5}, 1, true);
    nn::ArchSpec a;
    a.input_shape = {1, 6, 6};
    a.layers = {nn::Flatten{}, nn::Dense{36, 2}};
    a.output_dim = 2;
    optim::TrainConfig cfg;
    cfg.lr0 = 0.01;
    const auto model = optim::train(nn::init_model(a, 2), subset(ds, plan.train_ids), cfg).model;
    CHECK(metrics::evaluate(model, subset(ds, plan.test_ids)).macro_auroc > 0.99);
}

TEST_CASE("synthetic spec JSON round trip and validation") {
    const auto s = small_spec(9);
    CHECK(nlohmann::json(s).get<SyntheticSpec>() == s);
    SyntheticSpec bad = s;
    bad.class_weights = {0.5, 0.5};
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("train/val/test split keeps patients together") {
    const auto ds = generate_synthetic(small_spec(10));
    const auto plan = split_train_val_test(ds, {0.7, 0.1, 0.2}, 3);
    CHECK_NOTHROW(check_plan(ds, plan));
    CHECK(plan.train_ids.size() + plan.val_ids.size() + plan.test_ids.size() == ds.size());
    CHECK(plan == split_train_val_test(ds, {0.7, 0.1, 0.2}, 3));

    auto seven = testsupport::toy_dataset(21, TaskKind::single(2), {2}, 1, 7);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto p = split_train_val_test(seven, {0.34, 0.33, 0.33}, seed);
        CHECK(p.train_ids.size() % 7 == 0);
        CHECK(p.val_ids.size() % 7 == 0);
        CHECK(p.test_ids.size() % 7 == 0);
    }
}

TEST_CASE("fractions (1, 0, 0)") {
    const auto ds = testsupport::toy_dataset(10, TaskKind::single(2), {2}, 1);
    CHECK_THROWS_AS(split_train_val_test(ds, {1.0, 0.0, 0.0}, 1), ConfigError);
    const auto plan = split_train_val_test(ds, {1.0, 0.0, 0.0}, 1, true);
    CHECK(plan.train_ids.size() == 10);
    CHECK(plan.val_ids.empty());
    CHECK(plan.test_ids.empty());
}

TEST_CASE("sample-level forget size is round(fraction * |train|)") {
    const auto ds = testsupport::toy_dataset(100, TaskKind::single(2), {2}, 1);
    const auto plan = split_train_val_test(ds, {1.0, 0.0, 0.0}, 1, true);
    const auto f = split_forget_retain(ds, plan, 0.15, Grouping::SampleLevel, 2);
    CHECK(f.forget_ids.size() == 15);
    CHECK(f.retain_ids.size() == 85);
    CHECK_NOTHROW(check_plan(ds, f));
}

TEST_CASE("patient-level forget takes whole patients until the target is reached") {
    const auto ds = testsupport::toy_dataset(50, TaskKind::single(2), {2}, 1, 10);
    const auto plan = split_train_val_test(ds, {1.0, 0.0, 0.0}, 1, true);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto f = split_forget_retain(ds, plan, 0.30, Grouping::PatientLevel, seed);
        // Hand simulation: shuffle the 5 patients, take 10 + 10 >= 15.
        std::vector<std::uint64_t> patients{0, 1, 2, 3, 4};
        Rng rng(seed);
        rng.shuffle(patients);
        std::vector<std::uint64_t> expected;
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::uint64_t id = patients[k] * 10; id < patients[k] * 10 + 10; ++id) expected.push_back(id);
        }
        std::sort(expected.begin(), expected.end());
        CHECK(f.forget_ids.size() == 20);
        CHECK(f.forget_ids == expected);
        CHECK(f.retain_ids.size() == 30);
    }
}

TEST_CASE("randomized plans satisfy partition and patient integrity") {
    Rng meta(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t per = 1 + meta.uniform_index(4);
        const auto ds = testsupport::toy_dataset(40 + meta.uniform_index(160), TaskKind::single(3), {2},
                                                 meta.next(), per);
        const auto plan = split_train_val_test(ds, {0.6, 0.2, 0.2}, meta.next());
        const auto grouping = meta.bernoulli(0.5) ? Grouping::PatientLevel : Grouping::SampleLevel;
        const double frac = meta.uniform(0.05, 0.5);
        const auto f = split_forget_retain(ds, plan, frac, grouping, meta.next());
        CHECK_NOTHROW(check_plan(ds, f));
        if (grouping == Grouping::SampleLevel) {
            CHECK(f.forget_ids.size() == static_cast<std::size_t>(std::llround(frac * plan.train_ids.size())));
        } else {
            CHECK(patients_in(ds, f.forget_ids) + patients_in(ds, f.retain_ids) == patients_in(ds, f.train_ids));
        }
    }
}

TEST_CASE("check_plan detects violations") {
    const auto ds = testsupport::toy_dataset(30, TaskKind::single(2), {2}, 1, 3);
    auto plan = split_train_val_test(ds, {0.6, 0.2, 0.2}, 2);
    plan = split_forget_retain(ds, plan, 0.2, Grouping::PatientLevel, 3);
    auto overlap = plan;
    overlap.retain_ids.push_back(overlap.forget_ids.front());
    CHECK_THROWS_AS(check_plan(ds, overlap), DataError);
    auto missing = plan;
    missing.retain_ids.pop_back();
    CHECK_THROWS_AS(check_plan(ds, missing), DataError);
    auto split_patient = plan;
    const auto moved = split_patient.test_ids.front();
    split_patient.test_ids.erase(split_patient.test_ids.begin());
    split_patient.val_ids.push_back(moved);
    CHECK_THROWS_AS(check_plan(ds, split_patient), DataError);
}

TEST_CASE("dataset file round trip") {
    SyntheticSpec s = small_spec(12);
    s.task = TaskKind::multi(3);
    s.class_weights.clear();
    s.label_prevalence = {0.3, 0.5, 0.4};
    s.unknown_rate = 0.1;
    for (const auto& ds : {generate_synthetic(small_spec(12)), generate_synthetic(s)}) {
        std::stringstream ss;
        write_dataset(ss, ds);
        const std::string bytes = ss.str();
        CHECK(bytes.substr(0, 4) == "UNDS");
        std::stringstream in(bytes);
        CHECK(read_dataset(in) == ds);

        std::string bad = bytes;
        bad[1] = 'Z';
        std::stringstream bad_in(bad);
        CHECK_THROWS_AS(read_dataset(bad_in), FormatError);
        std::stringstream cut(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(read_dataset(cut), FormatError);
    }
    LabeledDataset empty;
    empty.task = TaskKind::single(2);
    empty.feature_shape = {2};
    std::stringstream ss;
    CHECK_THROWS_AS(write_dataset(ss, empty), Error);
}

TEST_CASE("empty-sample files are rejected on read") {
    std::stringstream ss;
    ss.write("UNDS", 4);
    const std::uint32_t version = kDatasetFormatVersion, count = 2, rank = 1, dim = 2;
    const std::uint8_t tag = 0;
    const std::uint64_t n = 0;
    ss.write(reinterpret_cast<const char*>(&version), 4);
    ss.write(reinterpret_cast<const char*>(&tag), 1);
    ss.write(reinterpret_cast<const char*>(&count), 4);
    ss.write(reinterpret_cast<const char*>(&rank), 4);
    ss.write(reinterpret_cast<const char*>(&dim), 4);
    ss.write(reinterpret_cast<const char*>(&n), 8);
    CHECK_THROWS_AS(read_dataset(ss), FormatError);
}

TEST_CASE("subset, concat and validation") {
    const auto ds = testsupport::toy_dataset(12, TaskKind::single(3), {2}, 1);
    const std::vector<std::uint64_t> ids{3, 7, 1};
    const auto sub = subset(ds, ids);
    REQUIRE(sub.size() == 3);
    CHECK(sub.samples[0].id == 3);
    CHECK(sub.samples[2].id == 1);
    const auto rest = subset(ds, std::vector<std::uint64_t>{0, 2});
    CHECK(concat(sub, rest).size() == 5);
    CHECK_THROWS_AS(subset(ds, std::vector<std::uint64_t>{99}), DataError);

    auto dup = ds;
    dup.samples[1].id = dup.samples[0].id;
    CHECK_THROWS_AS(validate(dup), DataError);
    auto range = ds;
    range.samples[0].features[0] = 1.5f;
    CHECK_THROWS_AS(validate(range), DataError);
}
