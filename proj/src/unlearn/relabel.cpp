#include "mulab/error.hpp"
#include "mulab/rng.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::unlearn {

std::string policy_name(RelabelPolicy p) {
    switch (p) {
        case RelabelPolicy::Default: return "default";
        case RelabelPolicy::ExcludeOriginal: return "exclude_original";
        case RelabelPolicy::Uniform: return "uniform";
        case RelabelPolicy::BitwiseFlip: return "bitwise_flip";
    }
    return "unknown";
}

RelabelPolicy policy_from_name(const std::string& name) {
    for (auto p : {RelabelPolicy::Default, RelabelPolicy::ExcludeOriginal, RelabelPolicy::Uniform,
                   RelabelPolicy::BitwiseFlip}) {
        if (policy_name(p) == name) return p;
    }
    throw ConfigError("unknown relabel policy \"" + name + "\"");
}

RelabelPolicy resolve_policy(RelabelPolicy p, const data::TaskKind& task) {
    if (p != RelabelPolicy::Default) return p;
    return task.is_single() ? RelabelPolicy::ExcludeOriginal : RelabelPolicy::BitwiseFlip;
}

data::LabeledDataset random_relabel(const data::LabeledDataset& forget, RelabelPolicy policy, std::uint64_t seed) {
    if (forget.empty()) throw DataError("cannot relabel an empty forget set");
    const RelabelPolicy p = resolve_policy(policy, forget.task);
    const std::size_t k = forget.task.count;
    if (forget.task.is_single()) {
        if (p == RelabelPolicy::BitwiseFlip) throw ConfigError("bitwise_flip applies to multi-label tasks only");
        if (p == RelabelPolicy::ExcludeOriginal && k < 2) {
            throw ConfigError("exclude_original needs at least two classes");
        }
    }
    data::LabeledDataset noisy = forget;
    Rng rng(seed);
    for (auto& s : noisy.samples) {
        if (forget.task.is_single()) {
            if (p == RelabelPolicy::ExcludeOriginal) {
                auto c = static_cast<std::uint32_t>(rng.uniform_index(k - 1));
                if (c >= s.class_index) ++c;
                s.class_index = c;
            } else {
                s.class_index = static_cast<std::uint32_t>(rng.uniform_index(k));
            }
            continue;
        }
        const auto original = s.labels;
        do {
            for (auto& b : s.labels) b = rng.bernoulli(0.5) ? data::LabelBit::Positive : data::LabelBit::Negative;
        } while (p == RelabelPolicy::ExcludeOriginal && s.labels == original);
    }
    return noisy;
}

}  // namespace mulab::unlearn
