#include <cmath>
#include <algorithm>
#include <map>

#include "doctest.h"
#include "mulab/data/split.hpp"
#include "mulab/data/synthetic.hpp"
#include "mulab/error.hpp"
#include "mulab/unlearn/unlearn.hpp"
#include "support.hpp"

using namespace mulab;
using namespace mulab::unlearn;

namespace {

struct Fixture {
    data::LabeledDataset train, forget, retain;
    optim::TrainConfig train_cfg;
    nn::ModelState pretrained;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        data::SyntheticSpec s;
        s.num_patients = 120;
        s.samples_per_patient_max = 3;
        s.class_weights = {0.4, 0.35, 0.25};
        s.class_separation = {1.5, 1.0, 0.6};
        s.feature_shape = {1, 8, 8};
        s.seed = 21;
        const auto ds = data::generate_synthetic(s);
        auto plan = data::split_train_val_test(ds, {1.0, 0.0, 0.0}, 1, true);
        plan = data::split_forget_retain(ds, plan, 0.2, data::Grouping::PatientLevel, 2);
        Fixture out;
        out.train = data::subset(ds, plan.train_ids);
        out.forget = data::subset(ds, plan.forget_ids);
        out.retain = data::subset(ds, plan.retain_ids);
        nn::ArchSpec a;
        a.input_shape = {1, 8, 8};
        a.layers = {nn::Conv2D{1, 4, 3, 1}, nn::BatchNorm{4}, nn::ReLU{}, nn::GlobalAvgPool{}, nn::Dense{4, 3}};
        a.output_dim = 3;
        out.train_cfg.epochs = 2;
        out.train_cfg.seed = 3;
        out.pretrained = optim::train(nn::init_model(a, 4), out.train, out.train_cfg).model;
        return out;
    }();
    return f;
}

UnlearnConfig relabel_cfg(std::uint64_t seed) {
    UnlearnConfig c;
    c.algorithm = Algorithm::Relabel;
    c.lr = 2e-3;
    c.seed = seed;
    return c;
}

UnlearnConfig salun_cfg(std::uint64_t seed, double threshold) {
    UnlearnConfig c = relabel_cfg(seed);
    c.algorithm = Algorithm::Salun;
    c.threshold = threshold;
    return c;
}

bool features_kept(const data::LabeledDataset& a, const data::LabeledDataset& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.samples[i];
        const auto& y = b.samples[i];
        if (x.id != y.id || x.patient_id != y.patient_id || x.group != y.group || x.features != y.features) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("two-class exclude-original relabeling flips every label") {
    const auto ds = testsupport::toy_dataset(50, data::TaskKind::single(2), {3}, 1);
    const auto noisy = random_relabel(ds, RelabelPolicy::ExcludeOriginal, 5);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(noisy.samples[i].class_index == 1 - ds.samples[i].class_index);
    CHECK(features_kept(ds, noisy));
}

TEST_CASE("eight-class exclude-original relabeling is uniform over the alternatives") {
    auto ds = testsupport::toy_dataset(10000, data::TaskKind::single(8), {1}, 2);
    for (auto& s : ds.samples) s.class_index = 3;
    const auto noisy = random_relabel(ds, RelabelPolicy::ExcludeOriginal, 6);
    std::map<std::uint32_t, std::size_t> counts;
    for (const auto& s : noisy.samples) ++counts[s.class_index];
    CHECK(counts.count(3) == 0);
    CHECK(counts.size() == 7);
    for (const auto& [c, n] : counts) CHECK(std::abs(static_cast<double>(n) / 10000.0 - 1.0 / 7.0) <= 0.02);
}

TEST_CASE("uniform policy may keep the original class") {
    const auto ds = testsupport::toy_dataset(2000, data::TaskKind::single(4), {1}, 3);
    const auto noisy = random_relabel(ds, RelabelPolicy::Uniform, 7);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) kept += noisy.samples[i].class_index == ds.samples[i].class_index;
    CHECK(std::abs(static_cast<double>(kept) / 2000.0 - 0.25) < 0.04);
}

TEST_CASE("bitwise flip has expected Hamming distance L/2") {
    const auto ds = testsupport::toy_dataset(4000, data::TaskKind::multi(5), {1}, 4);
    const auto noisy = random_relabel(ds, RelabelPolicy::BitwiseFlip, 8);
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t l = 0; l < 5; ++l) {
            const auto b = noisy.samples[i].labels[l];
            CHECK((b == data::LabelBit::Negative || b == data::LabelBit::Positive));
            total += b != ds.samples[i].labels[l];
        }
    }
    CHECK(std::abs(total / 4000.0 - 2.5) < 0.1);
    CHECK(features_kept(ds, noisy));
    CHECK(resolve_policy(RelabelPolicy::Default, data::TaskKind::multi(5)) == RelabelPolicy::BitwiseFlip);
    CHECK(resolve_policy(RelabelPolicy::Default, data::TaskKind::single(5)) == RelabelPolicy::ExcludeOriginal);
    CHECK_THROWS_AS(random_relabel(testsupport::toy_dataset(5, data::TaskKind::single(3), {1}, 1),
                                   RelabelPolicy::BitwiseFlip, 1),
                    ConfigError);
}

TEST_CASE("relabeling is deterministic in its seed") {
    const auto ds = testsupport::toy_dataset(100, data::TaskKind::single(5), {1}, 5);
    CHECK(random_relabel(ds, RelabelPolicy::ExcludeOriginal, 9) == random_relabel(ds, RelabelPolicy::ExcludeOriginal, 9));
    CHECK(!(random_relabel(ds, RelabelPolicy::ExcludeOriginal, 9) == random_relabel(ds, RelabelPolicy::ExcludeOriginal, 10)));
}

TEST_CASE("mask thresholding rule") {
    const nn::GradientVector g{{0.5, -0.05, 0.2}};
    CHECK(mask_from_gradient(g, 0.1).bits == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(mask_from_gradient(g, 0.0).bits == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(mask_from_gradient(g, 0.5).bits == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(mask_from_gradient(nn::GradientVector{{0.0, 1.0}}, 0.0).bits == std::vector<std::uint8_t>{0, 1});
    CHECK(mask_from_gradient(g, 0.1).count_ones() == 2);
    CHECK_THROWS_AS(mask_from_gradient(g, -1.0), ConfigError);
}

TEST_CASE("forget gradient is the sample mean independent of batch size") {
    const auto& f = fixture();
    const auto a = forget_gradient(f.pretrained, f.forget, 1);
    const auto b = forget_gradient(f.pretrained, f.forget, 32);
    const auto c = forget_gradient(f.pretrained, f.forget, f.forget.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        CHECK(a.values[i] == doctest::Approx(c.values[i]).epsilon(1e-9).scale(1e-12));
        CHECK(b.values[i] == doctest::Approx(c.values[i]).epsilon(1e-9).scale(1e-12));
    }
    CHECK_THROWS_AS(forget_gradient(f.pretrained, data::subset(f.forget, std::vector<std::uint64_t>{})), DataError);
}

TEST_CASE("exact unlearning") {
    const auto& f = fixture();
    CHECK(exact_unlearn(f.pretrained, f.train, f.train_cfg, 4) == f.pretrained);
    const auto a = exact_unlearn(f.pretrained, f.retain, f.train_cfg, 11);
    CHECK(a == exact_unlearn(f.pretrained, f.retain, f.train_cfg, 11));
    auto perturbed = f.pretrained;
    for (auto& p : perturbed.params) p = p * 3.0 + 1.0;
    CHECK(exact_unlearn(perturbed, f.retain, f.train_cfg, 11) == a);
}

TEST_CASE("fine-tuning with zero epochs or an all-zero mask keeps the parameters") {
    const auto& f = fixture();
    auto cfg = relabel_cfg(1);
    const auto noisy = random_relabel(f.forget, RelabelPolicy::ExcludeOriginal, 2);
    cfg.epochs = 0;
    CHECK(relabel_finetune(f.pretrained, f.retain, noisy, cfg) == f.pretrained);
    cfg.epochs = 2;
    SaliencyMask none;
    none.bits.assign(f.pretrained.params.size(), 0);
    const auto frozen = relabel_finetune(f.pretrained, f.retain, noisy, cfg, &none);
    CHECK(frozen.params == f.pretrained.params);
    CHECK(!(frozen.bn_stats == f.pretrained.bn_stats));
}

TEST_CASE("saliency unlearning freezes mask-0 parameters") {
    const auto& f = fixture();
    const auto g = forget_gradient(f.pretrained, f.forget);
    std::vector<double> mags;
    for (double v : g.values) mags.push_back(std::abs(v));
    std::sort(mags.begin(), mags.end());
    const double median = mags[mags.size() / 2];
    SaliencyMask mask;
    const auto model = saliency_unlearn(f.pretrained, f.forget, f.retain, salun_cfg(3, median), &mask);
    REQUIRE(mask.bits.size() == model.params.size());
    CHECK(mask.count_ones() > 0);
    CHECK(mask.count_ones() < mask.bits.size());
    std::size_t moved = 0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        if (mask.bits[i] == 0) {
            CHECK(model.params[i] == f.pretrained.params[i]);
        } else {
            moved += model.params[i] != f.pretrained.params[i];
        }
    }
    CHECK(moved > 0);

    const auto all_frozen = saliency_unlearn(f.pretrained, f.forget, f.retain, salun_cfg(3, INFINITY));
    CHECK(all_frozen.params == f.pretrained.params);
}

TEST_CASE("threshold zero reproduces random relabeling") {
    const auto& f = fixture();
    SaliencyMask mask;
    const auto salun = saliency_unlearn(f.pretrained, f.forget, f.retain, salun_cfg(4, 0.0), &mask);
    REQUIRE(mask.count_ones() == mask.bits.size());
    const auto relabel = random_relabel_unlearn(f.pretrained, f.forget, f.retain, relabel_cfg(4));
    CHECK(salun == relabel);
    CHECK(!(relabel.params == f.pretrained.params));
}

TEST_CASE("unlearning configs are validated") {
    CHECK_NOTHROW(validate(relabel_cfg(1)));
    CHECK_NOTHROW(validate(salun_cfg(1, 0.01)));
    auto bad = relabel_cfg(1);
    bad.threshold = 0.1;
    CHECK_THROWS_AS(validate(bad), ConfigError);
    auto missing = salun_cfg(1, 0.1);
    missing.threshold.reset();
    CHECK_THROWS_AS(validate(missing), ConfigError);
    CHECK(algorithm_from_name("salun") == Algorithm::Salun);
    CHECK_THROWS_AS(algorithm_from_name("sisa"), ConfigError);
    CHECK(policy_from_name(policy_name(RelabelPolicy::Uniform)) == RelabelPolicy::Uniform);
}
