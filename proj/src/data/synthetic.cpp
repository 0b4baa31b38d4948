#include "mulab/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mulab/error.hpp"
#include "mulab/rng.hpp"
#include "mulab/tensor.hpp"

namespace mulab::data {

namespace {

bool sums_to_one(const std::vector<double>& w) {
    return std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-9;
}

std::size_t draw_categorical(Rng& rng, const std::vector<double>& weights) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return k;
    }
    return weights.size() - 1;
}

// Fill spec defaults that depend on the class count.
SyntheticSpec resolved(SyntheticSpec spec) {
    const std::size_t k = spec.task.count;
    if (spec.task.is_single() && spec.class_weights.empty() && k > 0) {
        spec.class_weights.assign(k, 1.0 / static_cast<double>(k));
    }
    if (!spec.task.is_single() && spec.label_prevalence.empty()) spec.label_prevalence.assign(k, 0.3);
    if (spec.class_separation.empty()) spec.class_separation.assign(k, 1.5);
    return spec;
}

std::vector<double> make_template(Rng& rng, const std::vector<std::size_t>& shape, std::size_t block) {
    const std::size_t c = shape.size() == 3 ? shape[0] : 1;
    const std::size_t h = shape.size() == 3 ? shape[1] : 1;
    const std::size_t w = shape.size() == 3 ? shape[2] : shape[0];
    const std::size_t bh = (h + block - 1) / block, bw = (w + block - 1) / block;
    std::vector<double> coarse(c * bh * bw);
    for (auto& v : coarse) v = rng.normal();
    std::vector<double> t(c * h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                t[(ch * h + y) * w + x] = coarse[(ch * bh + y / block) * bw + x / block];
            }
        }
    }
    double ss = 0.0;
    for (double v : t) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(t.size()));
    for (double& v : t) v /= rms;
    return t;
}

}  // namespace

void validate(const SyntheticSpec& raw) {
    const SyntheticSpec spec = resolved(raw);
    const std::size_t k = spec.task.count;
    if (spec.num_patients == 0) throw ConfigError("synthetic spec needs at least one patient");
    if (k == 0) throw ConfigError("synthetic spec needs at least one class or label");
    if (spec.task.is_single() && k < 2) throw ConfigError("single-label synthetic data needs at least 2 classes");
    if (spec.samples_per_patient_min == 0 || spec.samples_per_patient_max < spec.samples_per_patient_min) {
        throw ConfigError("samples_per_patient range must satisfy 1 <= min <= max");
    }
    if (spec.feature_shape.size() != 1 && spec.feature_shape.size() != 3) {
        throw ConfigError("feature_shape must be {D} or {C, H, W}");
    }
    for (auto d : spec.feature_shape) {
        if (d == 0) throw ConfigError("feature_shape has a zero dimension");
    }
    if (spec.task.is_single()) {
        if (spec.class_weights.size() != k || !sums_to_one(spec.class_weights)) {
            throw ConfigError("class_weights must have one entry per class and sum to 1");
        }
        for (double w : spec.class_weights) {
            if (!(w >= 0.0)) throw ConfigError("class_weights must be non-negative");
        }
    } else {
        if (spec.label_prevalence.size() != k) throw ConfigError("label_prevalence must have one entry per label");
        for (double p : spec.label_prevalence) {
            if (!(p > 0.0 && p < 1.0)) throw ConfigError("label_prevalence entries must lie in (0, 1)");
        }
    }
    if (spec.group_proportions.empty() || spec.group_proportions.size() > 256 || !sums_to_one(spec.group_proportions)) {
        throw ConfigError("group_proportions must be non-empty and sum to 1");
    }
    if (spec.class_separation.size() != k) throw ConfigError("class_separation must have one entry per class");
    for (double s : spec.class_separation) {
        if (!(s > 0.0)) throw ConfigError("class_separation values must be positive");
    }
    if (!(spec.noise_std >= 0.0) || !(spec.patient_effect_std >= 0.0) || !(spec.contrast > 0.0)) {
        throw ConfigError("noise_std and patient_effect_std must be >= 0 and contrast > 0");
    }
    if (spec.template_block == 0) throw ConfigError("template_block must be positive");
    if (!(spec.label_noise_rate >= 0.0 && spec.label_noise_rate < 1.0)) throw ConfigError("label_noise_rate must lie in [0, 1)");
    if (!(spec.unknown_rate >= 0.0 && spec.unknown_rate < 1.0)) throw ConfigError("unknown_rate must lie in [0, 1)");
}

LabeledDataset generate_synthetic(const SyntheticSpec& raw) {
    validate(raw);
    const SyntheticSpec spec = resolved(raw);
    const std::size_t k = spec.task.count;
    const std::size_t fs = shape_product(spec.feature_shape);

    Rng template_rng(derive_seed(spec.seed, {tag_id("templates")}));
    std::vector<std::vector<double>> templates;
    for (std::size_t c = 0; c < k; ++c) templates.push_back(make_template(template_rng, spec.feature_shape, spec.template_block));

    Rng rng(derive_seed(spec.seed, {tag_id("samples")}));
    LabeledDataset ds;
    ds.task = spec.task;
    ds.feature_shape = spec.feature_shape;
    ds.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";

    std::vector<double> signal(fs), patient_offset(fs);
    std::uint64_t next_id = 0;
    for (std::size_t p = 0; p < spec.num_patients; ++p) {
        const std::size_t span = spec.samples_per_patient_max - spec.samples_per_patient_min + 1;
        const std::size_t n = spec.samples_per_patient_min + static_cast<std::size_t>(rng.uniform_index(span));
        const auto group = static_cast<std::uint8_t>(draw_categorical(rng, spec.group_proportions));
        for (auto& v : patient_offset) v = spec.patient_effect_std * rng.normal();

        for (std::size_t i = 0; i < n; ++i) {
            Sample s;
            s.id = next_id++;
            s.patient_id = p;
            s.group = group;
            std::fill(signal.begin(), signal.end(), 0.0);
            if (spec.task.is_single()) {
                const std::size_t cls = draw_categorical(rng, spec.class_weights);
                for (std::size_t f = 0; f < fs; ++f) signal[f] = spec.class_separation[cls] * templates[cls][f];
                std::size_t recorded = cls;
                if (spec.label_noise_rate > 0.0 && rng.bernoulli(spec.label_noise_rate)) {
                    recorded = static_cast<std::size_t>(rng.uniform_index(k - 1));
                    if (recorded >= cls) ++recorded;
                }
                s.class_index = static_cast<std::uint32_t>(recorded);
            } else {
                s.labels.resize(k);
                for (std::size_t l = 0; l < k; ++l) {
                    const bool positive = rng.bernoulli(spec.label_prevalence[l]);
                    if (positive) {
                        for (std::size_t f = 0; f < fs; ++f) signal[f] += spec.class_separation[l] * templates[l][f];
                    }
                    s.labels[l] = positive ? LabelBit::Positive : LabelBit::Negative;
                    if (spec.unknown_rate > 0.0 && rng.bernoulli(spec.unknown_rate)) s.labels[l] = LabelBit::Unknown;
                }
            }
            s.features.resize(fs);
            for (std::size_t f = 0; f < fs; ++f) {
                const double v = 0.5 + spec.contrast * (signal[f] + patient_offset[f] + spec.noise_std * rng.normal());
                const double pixel = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
                s.features[f] = static_cast<float>(pixel / 255.0);
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"num_patients", s.num_patients},
                       {"samples_per_patient_min", s.samples_per_patient_min},
                       {"samples_per_patient_max", s.samples_per_patient_max},
                       {"task", s.task.is_single() ? "single_label" : "multi_label"},
                       {"count", s.task.count},
                       {"class_weights", s.class_weights},
                       {"label_prevalence", s.label_prevalence},
                       {"group_proportions", s.group_proportions},
                       {"feature_shape", s.feature_shape},
                       {"class_separation", s.class_separation},
                       {"noise_std", s.noise_std},
                       {"patient_effect_std", s.patient_effect_std},
                       {"contrast", s.contrast},
                       {"template_block", s.template_block},
                       {"label_noise_rate", s.label_noise_rate},
                       {"unknown_rate", s.unknown_rate},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    try {
        SyntheticSpec d;
        const std::string task = j.value("task", std::string("single_label"));
        if (task != "single_label" && task != "multi_label") {
            throw ConfigError("task must be \"single_label\" or \"multi_label\"");
        }
        const std::size_t count = j.value("count", std::size_t{3});
        d.task = task == "single_label" ? TaskKind::single(count) : TaskKind::multi(count);
        d.num_patients = j.value("num_patients", d.num_patients);
        d.samples_per_patient_min = j.value("samples_per_patient_min", d.samples_per_patient_min);
        d.samples_per_patient_max = j.value("samples_per_patient_max", d.samples_per_patient_max);
        d.class_weights = j.value("class_weights", d.class_weights);
        d.label_prevalence = j.value("label_prevalence", d.label_prevalence);
        d.group_proportions = j.value("group_proportions", d.group_proportions);
        d.feature_shape = j.value("feature_shape", d.feature_shape);
        d.class_separation = j.value("class_separation", d.class_separation);
        d.noise_std = j.value("noise_std", d.noise_std);
        d.patient_effect_std = j.value("patient_effect_std", d.patient_effect_std);
        d.contrast = j.value("contrast", d.contrast);
        d.template_block = j.value("template_block", d.template_block);
        d.label_noise_rate = j.value("label_noise_rate", d.label_noise_rate);
        d.unknown_rate = j.value("unknown_rate", d.unknown_rate);
        d.seed = j.value("seed", d.seed);
        s = std::move(d);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed synthetic spec: ") + e.what());
    }
}

}  // namespace mulab::data
