#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mulab/data/dataset.hpp"
#include "mulab/nn/model.hpp"

namespace mulab::optim {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState fresh(std::size_t num_params);
};

// One bias-corrected Adam step. With a non-empty mask, entries whose mask
// byte is 0 keep their parameter and both moment estimates unchanged.
// step_count always advances by one.
void adam_step(std::span<double> params, const nn::GradientVector& grads, AdamState& state, double lr,
               std::span<const std::uint8_t> mask = {});

struct LrSchedule {
    double lr0 = 1e-3;
    double eta_min = 1e-4;
    std::uint64_t total_steps = 1;
};

// eta_min + (lr0 - eta_min) * (1 + cos(pi * step / total_steps)) / 2, for 0 <= step <= total_steps.
double cosine_lr(const LrSchedule& schedule, std::uint64_t step);

struct TrainConfig {
    std::size_t epochs = 6;
    std::size_t batch_size = 32;
    double lr0 = 1e-3;
    double eta_min_factor = 0.1;  // eta_min = eta_min_factor * lr0
    nn::LossKind loss_kind = nn::LossKind::CrossEntropy;
    std::uint64_t seed = 0;            // shuffling stream
    std::vector<std::uint8_t> mask;    // empty: every parameter trainable
};

struct TrainResult {
    nn::ModelState model;
    std::vector<double> epoch_losses;  // sample-weighted mean loss per epoch
};

nn::LossKind loss_kind_for(const data::TaskKind& task);

// Batch tensor (n, feature_shape...) and targets for the given sample indices.
std::pair<Tensor, nn::Targets> make_batch(const data::LabeledDataset& ds, std::span<const std::size_t> indices);

// Mini-batch Adam with a per-step cosine schedule over epochs * ceil(n / batch)
// steps. Each epoch visits the samples in a fresh seeded permutation; the last
// partial batch is kept. BatchNorm running statistics update after every step.
TrainResult train(nn::ModelState model, const data::LabeledDataset& data, const TrainConfig& cfg);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace mulab::optim
