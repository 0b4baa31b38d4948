#include "mulab/error.hpp"
#include "mulab/rng.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::unlearn {

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Exact: return "exact";
        case Algorithm::Relabel: return "relabel";
        case Algorithm::Salun: return "salun";
    }
    return "unknown";
}

Algorithm algorithm_from_name(const std::string& name) {
    for (auto a : {Algorithm::Exact, Algorithm::Relabel, Algorithm::Salun}) {
        if (algorithm_name(a) == name) return a;
    }
    throw ConfigError("unknown algorithm \"" + name + "\" (expected exact, relabel or salun)");
}

void validate(const UnlearnConfig& cfg) {
    if (cfg.threshold.has_value() != (cfg.algorithm == Algorithm::Salun)) {
        throw ConfigError("a gradient threshold is required for salun and only for salun");
    }
    if (cfg.threshold && !(*cfg.threshold >= 0.0)) throw ConfigError("saliency threshold must be >= 0");
    if (cfg.batch_size == 0) throw ConfigError("unlearning batch_size must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("unlearning lr must be positive");
}

std::uint64_t relabel_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {tag_id("relabel")}); }
std::uint64_t finetune_seed(std::uint64_t run_seed) { return derive_seed(run_seed, {tag_id("finetune")}); }

nn::ModelState exact_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& retain,
                             const optim::TrainConfig& train_cfg, std::uint64_t init_seed) {
    if (retain.empty()) throw DataError("exact unlearning needs a non-empty retain set");
    return optim::train(nn::init_model(pretrained.arch, init_seed), retain, train_cfg).model;
}

nn::ModelState relabel_finetune(const nn::ModelState& pretrained, const data::LabeledDataset& retain,
                                const data::LabeledDataset& noisy_forget, const UnlearnConfig& cfg,
                                const SaliencyMask* mask) {
    const data::LabeledDataset combined = data::concat(retain, noisy_forget);
    if (combined.empty()) throw DataError("relabel fine-tuning needs a non-empty combined set");
    optim::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr0 = cfg.lr;
    tc.eta_min_factor = cfg.eta_min_factor;
    tc.loss_kind = optim::loss_kind_for(combined.task);
    tc.seed = finetune_seed(cfg.seed);
    if (mask) {
        if (mask->bits.size() != pretrained.params.size()) throw ShapeError("saliency mask length differs from params");
        tc.mask = mask->bits;
    }
    return optim::train(pretrained, combined, tc).model;
}

nn::ModelState random_relabel_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                      const data::LabeledDataset& retain, const UnlearnConfig& cfg) {
    const auto noisy = random_relabel(forget, cfg.relabel_policy, relabel_seed(cfg.seed));
    return relabel_finetune(pretrained, retain, noisy, cfg);
}

nn::ModelState saliency_unlearn(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                const data::LabeledDataset& retain, const UnlearnConfig& cfg,
                                SaliencyMask* mask_out) {
    if (cfg.algorithm != Algorithm::Salun) throw ConfigError("saliency_unlearn needs algorithm salun");
    validate(cfg);
    SaliencyMask mask = compute_saliency_mask(pretrained, forget, *cfg.threshold);
    const auto noisy = random_relabel(forget, cfg.relabel_policy, relabel_seed(cfg.seed));
    auto model = relabel_finetune(pretrained, retain, noisy, cfg, &mask);
    if (mask_out) *mask_out = std::move(mask);
    return model;
}

}  // namespace mulab::unlearn
