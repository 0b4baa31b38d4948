#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mulab/error.hpp"
#include "mulab/metrics/metrics.hpp"

namespace mulab::metrics {

namespace {

constexpr std::size_t kEvalBatch = 256;

struct MacroResult {
    double macro = std::numeric_limits<double>::quiet_NaN();
    std::map<std::size_t, double> per_class;
    std::size_t skipped = 0;
};

bool is_positive(const data::LabeledDataset& ds, std::size_t row, std::size_t cls) {
    const auto& s = ds.samples[row];
    if (ds.task.is_single()) return s.class_index == cls;
    return s.labels[cls] == data::LabelBit::Positive;
}

MacroResult macro_over(std::span<const double> probs, const data::LabeledDataset& ds,
                       const std::vector<std::size_t>& rows) {
    const std::size_t k = ds.task.count;
    MacroResult out;
    std::vector<double> scores(rows.size());
    std::vector<std::uint8_t> labels(rows.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            scores[i] = probs[rows[i] * k + c];
            labels[i] = is_positive(ds, rows[i], c) ? 1 : 0;
        }
        if (const auto a = auroc_binary(scores, labels)) {
            out.per_class.emplace(c, *a);
            sum += *a;
        } else {
            ++out.skipped;
        }
    }
    if (!out.per_class.empty()) out.macro = sum / static_cast<double>(out.per_class.size());
    return out;
}

}  // namespace

std::vector<double> predict_proba(const nn::ModelState& model, const data::LabeledDataset& ds) {
    if (ds.empty()) throw DataError("cannot evaluate on an empty dataset");
    if (model.arch.output_dim != ds.task.count) {
        throw DataError("model output_dim does not match the dataset's class/label count");
    }
    const std::size_t k = ds.task.count;
    std::vector<double> probs(ds.size() * k);
    std::vector<std::size_t> idx;
    for (std::size_t begin = 0; begin < ds.size(); begin += kEvalBatch) {
        const std::size_t end = std::min(ds.size(), begin + kEvalBatch);
        idx.resize(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        const std::size_t fs = ds.feature_size();
        std::vector<std::size_t> shape{idx.size()};
        shape.insert(shape.end(), ds.feature_shape.begin(), ds.feature_shape.end());
        std::vector<double> values(idx.size() * fs);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto& f = ds.samples[idx[r]].features;
            for (std::size_t q = 0; q < fs; ++q) values[r * fs + q] = static_cast<double>(f[q]);
        }
        const Tensor logits = nn::forward(model, Tensor(std::move(shape), std::move(values)), nn::Mode::Eval);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* z = logits.data() + r * k;
            double* p = probs.data() + (begin + r) * k;
            if (ds.task.is_single()) {
                const double zmax = *std::max_element(z, z + k);
                double denom = 0.0;
                for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c] - zmax);
                for (std::size_t c = 0; c < k; ++c) p[c] = std::exp(z[c] - zmax) / denom;
            } else {
                for (std::size_t c = 0; c < k; ++c) p[c] = 1.0 / (1.0 + std::exp(-z[c]));
            }
        }
    }
    return probs;
}

EvalResult evaluate_probabilities(std::span<const double> probs, const data::LabeledDataset& ds,
                                  std::string set_name) {
    if (ds.empty()) throw DataError("cannot evaluate on an empty dataset");
    if (probs.size() != ds.size() * ds.task.count) throw ShapeError("probability matrix does not match the dataset");
    if (!ds.task.is_single() && ds.has_unknown_labels()) {
        throw DataError("evaluation data has Unknown labels; apply U-one first");
    }
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});

    EvalResult r;
    r.set_name = std::move(set_name);
    r.n_samples = ds.size();
    auto whole = macro_over(probs, ds, all);
    r.macro_auroc = whole.macro;
    r.per_class = std::move(whole.per_class);
    r.skipped_classes = whole.skipped;

    std::map<std::uint8_t, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < ds.size(); ++i) by_group[ds.samples[i].group].push_back(i);
    for (const auto& [g, rows] : by_group) r.per_group.emplace(g, macro_over(probs, ds, rows).macro);
    return r;
}

EvalResult evaluate(const nn::ModelState& model, const data::LabeledDataset& ds, std::string set_name) {
    const auto probs = predict_proba(model, ds);
    return evaluate_probabilities(probs, ds, std::move(set_name));
}

DifficultyRanking rank_difficulty(const std::map<std::size_t, double>& per_class_auroc) {
    if (per_class_auroc.size() < 3) {
        throw DataError("difficulty ranking needs at least 3 evaluable classes, got " +
                        std::to_string(per_class_auroc.size()));
    }
    DifficultyRanking r;
    for (const auto& [c, a] : per_class_auroc) r.order.push_back(c);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return per_class_auroc.at(a) > per_class_auroc.at(b); });
    r.easy = r.order.front();
    r.intermediate = r.order[(r.order.size() - 1) / 2];
    r.hard = r.order.back();
    return r;
}

DifficultyRanking rank_difficulty(const nn::ModelState& pretrained, const data::LabeledDataset& test) {
    return rank_difficulty(evaluate(pretrained, test, "test").per_class);
}

}  // namespace mulab::metrics
