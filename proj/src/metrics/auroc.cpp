#include <algorithm>
#include <cmath>
#include <numeric>

#include "mulab/error.hpp"
#include "mulab/metrics/metrics.hpp"

namespace mulab::metrics {

std::optional<double> auroc_binary(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ShapeError("auroc: scores and labels differ in length");
    const std::size_t n = scores.size();
    for (double s : scores) {
        if (std::isnan(s)) throw NumericError("auroc: NaN score");
    }
    std::size_t positives = 0;
    for (auto l : labels) positives += l ? 1 : 0;
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the rank sum of positives, with tied blocks sharing their mid-rank;
    // kept doubled so every quantity is an integer.
    std::uint64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t twice_mid_rank = static_cast<std::uint64_t>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) twice_rank_sum += twice_mid_rank;
        }
        i = j;
    }
    const std::uint64_t p = positives;
    // U = rank_sum - p(p+1)/2, so 2U = twice_rank_sum - p(p+1).
    const std::uint64_t twice_u = twice_rank_sum - p * (p + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace mulab::metrics
