#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mulab/data/dataset.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/optim/optim.hpp"

namespace mulab::unlearn {

enum class Algorithm { Exact, Relabel, Salun };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Default resolves to ExcludeOriginal for single-label tasks and BitwiseFlip
// for multi-label tasks.
enum class RelabelPolicy { Default, ExcludeOriginal, Uniform, BitwiseFlip };

std::string policy_name(RelabelPolicy p);
RelabelPolicy policy_from_name(const std::string& name);
RelabelPolicy resolve_policy(RelabelPolicy p, const data::TaskKind& task);

// bits[i] == 1 marks parameter i as trainable during unlearning.
struct SaliencyMask {
    std::vector<std::uint8_t> bits;
    double threshold = 0.0;
    std::string source;

    [[nodiscard]] std::size_t count_ones() const noexcept;
};

struct UnlearnConfig {
    Algorithm algorithm = Algorithm::Relabel;
    std::size_t epochs = 2;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double eta_min_factor = 0.1;
    std::optional<double> threshold;  // Salun only
    std::uint64_t seed = 0;
    RelabelPolicy relabel_policy = RelabelPolicy::Default;
};

// Throws ConfigError unless the threshold is present exactly for Salun.
void validate(const UnlearnConfig& cfg);

// Re-initialize with init_seed and train on the retain set with the original
// recipe. Only the pretrained architecture is used.
nn::ModelState exact_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& retain,
                             const optim::TrainConfig& train_cfg, std::uint64_t init_seed);

// Noisy copy of the forget set: labels redrawn per policy, everything else kept.
//   ExcludeOriginal: uniform over the other classes (other label vectors for multi-label)
//   Uniform:         uniform over all classes (fair coin per bit for multi-label)
//   BitwiseFlip:     multi-label only, every bit replaced by a fair coin
data::LabeledDataset random_relabel(const data::LabeledDataset& forget, RelabelPolicy policy, std::uint64_t seed);

// Fine-tune from the pretrained parameters on retain followed by the noisy
// forget set (reshuffled every epoch), with a fresh cosine schedule from
// cfg.lr to eta_min_factor * cfg.lr. Mask-0 parameters stay frozen.
nn::ModelState relabel_finetune(const nn::ModelState& pretrained, const data::LabeledDataset& retain,
                                const data::LabeledDataset& noisy_forget, const UnlearnConfig& cfg,
                                const SaliencyMask* mask = nullptr);

// Mean over all forget samples of d(loss)/d(params), with original labels and
// eval-mode BatchNorm, accumulated over mini-batches.
nn::GradientVector forget_gradient(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                   std::size_t batch_size = 32);

// bit i = 1 iff |g_i| > threshold.
SaliencyMask mask_from_gradient(const nn::GradientVector& grad, double threshold);

SaliencyMask compute_saliency_mask(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                   double threshold);

// Relabel the forget set and fine-tune on retain + noisy forget.
nn::ModelState random_relabel_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                      const data::LabeledDataset& retain, const UnlearnConfig& cfg);

// Saliency mask from the forget gradient, then masked relabel fine-tuning.
nn::ModelState saliency_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                const data::LabeledDataset& retain, const UnlearnConfig& cfg,
                                SaliencyMask* mask_out = nullptr);

// Seed used by the relabel and fine-tune shuffling streams of an unlearning run.
std::uint64_t relabel_seed(std::uint64_t run_seed);
std::uint64_t finetune_seed(std::uint64_t run_seed);

}  // namespace mulab::unlearn
