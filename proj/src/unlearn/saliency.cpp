#include <algorithm>
#include <cmath>
#include <numeric>

#include "mulab/error.hpp"
#include "mulab/simd/kernels.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::unlearn {

std::size_t SaliencyMask::count_ones() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

nn::GradientVector forget_gradient(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                   std::size_t batch_size) {
    if (forget.empty()) throw DataError("cannot compute a saliency gradient on an empty forget set");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    const auto kind = optim::loss_kind_for(forget.task);
    nn::GradientVector total;
    total.values.assign(pretrained.params.size(), 0.0);
    std::vector<std::size_t> idx;
    const double n = static_cast<double>(forget.size());
    for (std::size_t begin = 0; begin < forget.size(); begin += batch_size) {
        const std::size_t end = std::min(forget.size(), begin + batch_size);
        idx.resize(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        auto [batch, targets] = optim::make_batch(forget, idx);
        const auto lg = nn::loss_and_grad(pretrained, batch, targets, kind, nn::Mode::Eval);
        // Batch means weighted by batch size give the mean over all samples.
        simd::axpy(static_cast<double>(idx.size()) / n, lg.grad.values.data(), total.values.data(),
                   total.values.size());
    }
    return total;
}

SaliencyMask mask_from_gradient(const nn::GradientVector& grad, double threshold) {
    if (!(threshold >= 0.0)) throw ConfigError("saliency threshold must be >= 0");
    SaliencyMask mask;
    mask.threshold = threshold;
    mask.bits.resize(grad.values.size());
    for (std::size_t i = 0; i < grad.values.size(); ++i) mask.bits[i] = std::abs(grad.values[i]) > threshold ? 1 : 0;
    return mask;
}

SaliencyMask compute_saliency_mask(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                                   double threshold) {
    SaliencyMask mask = mask_from_gradient(forget_gradient(pretrained, forget), threshold);
    mask.source = "forget_gradient(n=" + std::to_string(forget.size()) +
                  ", params=" + std::to_string(pretrained.params.size()) + ")";
    return mask;
}

}  // namespace mulab::unlearn
