#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mulab/data/dataset.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace testsupport {

// O(n^2) pair counting: ties score one half.
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / pairs;
}

inline mulab::Tensor random_batch(std::size_t n, const std::vector<std::size_t>& feature_shape, std::uint64_t seed,
                                  double scale = 1.0) {
    mulab::Rng rng(seed);
    std::vector<std::size_t> shape{n};
    shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
    mulab::Tensor t(shape);
    for (auto& v : t.values()) v = scale * rng.normal();
    return t;
}

inline mulab::nn::Targets random_targets(std::size_t n, std::size_t k, mulab::nn::LossKind kind, std::uint64_t seed) {
    mulab::Rng rng(seed);
    if (kind == mulab::nn::LossKind::CrossEntropy) {
        std::vector<std::uint32_t> classes(n);
        for (auto& c : classes) c = static_cast<std::uint32_t>(rng.uniform_index(k));
        return mulab::nn::Targets::single(std::move(classes));
    }
    std::vector<std::uint8_t> bits(n * k);
    for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    return mulab::nn::Targets::multi(std::move(bits), k);
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central differences with step h on every parameter. The relative error of
// one coordinate is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradient(const mulab::nn::ModelState& model, const mulab::Tensor& batch,
                                const mulab::nn::Targets& targets, mulab::nn::LossKind kind, double h = 1e-5,
                                double floor = 1e-6) {
    const auto lg = mulab::nn::loss_and_grad(model, batch, targets, kind, mulab::nn::Mode::Train);
    GradCheck out;
    auto probe = model;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const double p = model.params[i];
        probe.params[i] = p + h;
        const double up = mulab::nn::loss_value(probe, batch, targets, kind, mulab::nn::Mode::Train);
        probe.params[i] = p - h;
        const double down = mulab::nn::loss_value(probe, batch, targets, kind, mulab::nn::Mode::Train);
        probe.params[i] = p;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = lg.grad.values[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
        ++out.checked;
    }
    return out;
}

// Initialized model with every parameter (biases included) jittered, so no
// unit sits exactly on a ReLU kink.
inline mulab::nn::ModelState jittered_model(const mulab::nn::ArchSpec& arch, std::uint64_t seed, double scale = 0.1) {
    auto model = mulab::nn::init_model(arch, seed);
    mulab::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (auto& p : model.params) p += scale * rng.normal();
    return model;
}

// Small random networks for gradient checks. Variant v cycles through
// conv/batchnorm/pool/flatten/dense combinations so every layer type appears.
inline mulab::nn::ArchSpec small_arch(std::size_t variant) {
    using namespace mulab::nn;
    ArchSpec a;
    switch (variant % 4) {
        case 0:
            a.input_shape = {1, 5, 5};
            a.layers = {Conv2D{1, 3, 3, 1}, BatchNorm{3}, ReLU{}, GlobalAvgPool{}, Dense{3, 3}};
            a.output_dim = 3;
            break;
        case 1:
            a.input_shape = {2, 6, 6};
            a.layers = {Conv2D{2, 2, 3, 2}, ReLU{}, Flatten{}, Dense{8, 4}, BatchNorm{4}, ReLU{}, Dense{4, 3}};
            a.output_dim = 3;
            break;
        case 2:
            a.input_shape = {6};
            a.layers = {Dense{6, 8}, BatchNorm{8}, ReLU{}, Dense{8, 4}};
            a.output_dim = 4;
            break;
        default:
            a.input_shape = {1, 4, 4};
            a.layers = {Conv2D{1, 2, 2, 1}, BatchNorm{2}, ReLU{}, Conv2D{2, 2, 2, 1}, ReLU{}, Flatten{}, Dense{8, 2}};
            a.output_dim = 2;
            break;
    }
    return a;
}

// Dataset with Gaussian features, ids 0..n-1, patient = id / per_patient,
// group alternating by patient.
inline mulab::data::LabeledDataset toy_dataset(std::size_t n, mulab::data::TaskKind task,
                                               std::vector<std::size_t> feature_shape, std::uint64_t seed,
                                               std::size_t per_patient = 1) {
    mulab::Rng rng(seed);
    mulab::data::LabeledDataset ds;
    ds.task = task;
    ds.feature_shape = feature_shape;
    std::size_t fs = 1;
    for (auto d : feature_shape) fs *= d;
    for (std::size_t i = 0; i < n; ++i) {
        mulab::data::Sample s;
        s.id = i;
        s.patient_id = i / per_patient;
        s.group = static_cast<std::uint8_t>(s.patient_id % 2);
        s.features.resize(fs);
        for (auto& f : s.features) f = static_cast<float>(rng.uniform());
        if (task.is_single()) {
            s.class_index = static_cast<std::uint32_t>(rng.uniform_index(task.count));
        } else {
            s.labels.resize(task.count);
            for (auto& b : s.labels) b = rng.bernoulli(0.5) ? mulab::data::LabelBit::Positive : mulab::data::LabelBit::Negative;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// Two well-separated Gaussian blobs in D dimensions.
inline mulab::data::LabeledDataset blob_dataset(std::size_t n, std::size_t dim, std::uint64_t seed) {
    mulab::Rng rng(seed);
    mulab::data::LabeledDataset ds;
    ds.task = mulab::data::TaskKind::single(2);
    ds.feature_shape = {dim};
    for (std::size_t i = 0; i < n; ++i) {
        mulab::data::Sample s;
        s.id = i;
        s.patient_id = i;
        s.class_index = static_cast<std::uint32_t>(i % 2);
        const double centre = s.class_index == 0 ? 0.25 : 0.75;
        for (std::size_t d = 0; d < dim; ++d) {
            s.features.push_back(static_cast<float>(std::clamp(centre + 0.05 * rng.normal(), 0.0, 1.0)));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace testsupport
