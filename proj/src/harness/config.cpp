#include <cmath>
#include <fstream>

#include "mulab/error.hpp"
#include "mulab/harness/config.hpp"

namespace mulab::harness {

data::SyntheticSpec default_fixture_spec() {
    data::SyntheticSpec s;
    s.num_patients = 2000;
    s.samples_per_patient_min = 1;
    s.samples_per_patient_max = 6;
    s.task = data::TaskKind::single(3);
    s.class_weights = {0.4, 0.35, 0.25};
    s.class_separation = {0.25, 0.17, 0.11};
    s.noise_std = 1.0;
    s.patient_effect_std = 0.3;
    s.label_noise_rate = 0.1;
    s.seed = 11;
    return s;
}

nn::ArchSpec default_fixture_arch() {
    nn::ArchSpec a;
    a.input_shape = {1, 16, 16};
    a.layers = {nn::Conv2D{1, 4, 3, 1}, nn::BatchNorm{4},      nn::ReLU{}, nn::Flatten{},
                nn::Dense{784, 32},     nn::BatchNorm{32},     nn::ReLU{}, nn::Dense{32, 3}};
    a.output_dim = 3;
    return a;
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.dataset.synthetic = default_fixture_spec();
    cfg.arch = default_fixture_arch();
    cfg.sweep.lr = {1e-4, 5e-4, 1e-3, 1.5e-3, 2e-3, 5e-3};
    cfg.sweep.threshold = {1e-3, 4e-3};
    return cfg;
}

bool has_approximate(const ExperimentConfig& cfg) {
    for (auto a : cfg.algorithms) {
        if (a != unlearn::Algorithm::Exact) return true;
    }
    return false;
}

std::string group_name(const ExperimentConfig& cfg, std::uint8_t group) {
    if (group < cfg.group_names.size()) return cfg.group_names[group];
    return "group" + std::to_string(group);
}

void validate(const ExperimentConfig& cfg) {
    if (!cfg.dataset.synthetic && cfg.dataset.path.empty()) throw ConfigError("dataset needs a synthetic spec or a path");
    if (cfg.dataset.synthetic) data::validate(*cfg.dataset.synthetic);
    nn::validate(cfg.arch);
    if (cfg.repeats == 0) throw ConfigError("repeats must be >= 1");
    if (cfg.jobs == 0) throw ConfigError("jobs must be >= 1");
    if (cfg.train.epochs == 0) throw ConfigError("train.epochs must be >= 1");
    if (cfg.unlearn_epochs == 0) throw ConfigError("unlearn.epochs must be >= 1");
    if (cfg.unlearn_batch_size == 0) throw ConfigError("unlearn.batch_size must be positive");
    if (cfg.forget_fractions.empty()) throw ConfigError("forget_fractions must not be empty");
    for (double f : cfg.forget_fractions) {
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("forget fractions must lie in (0, 1), got " + std::to_string(f));
    }
    if (cfg.algorithms.empty()) throw ConfigError("algorithms must not be empty");
    for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            if (cfg.algorithms[i] == cfg.algorithms[k]) {
                throw ConfigError("algorithm listed twice: " + unlearn::algorithm_name(cfg.algorithms[i]));
            }
        }
    }
    for (std::size_t i = 0; i < cfg.forget_fractions.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            if (cfg.forget_fractions[i] == cfg.forget_fractions[k]) throw ConfigError("forget fraction listed twice");
        }
    }
    if (has_approximate(cfg) && cfg.sweep.lr.empty()) throw ConfigError("sweep.lr must not be empty");
    for (double lr : cfg.sweep.lr) {
        if (!(lr > 0.0)) throw ConfigError("sweep learning rates must be positive");
    }
    for (auto a : cfg.algorithms) {
        if (a == unlearn::Algorithm::Salun && cfg.sweep.threshold.empty()) {
            throw ConfigError("sweep.threshold must not be empty when salun is requested");
        }
    }
    for (double t : cfg.sweep.threshold) {
        if (!(t >= 0.0)) throw ConfigError("sweep thresholds must be >= 0");
    }
    const double total = cfg.split.train + cfg.split.val + cfg.split.test;
    if (!(cfg.split.train > 0.0 && cfg.split.test > 0.0 && cfg.split.val >= 0.0) || std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be nonnegative, train/test positive, summing to 1");
    }
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
    nlohmann::json dataset = nlohmann::json::object();
    if (cfg.dataset.synthetic) {
        dataset["synthetic"] = *cfg.dataset.synthetic;
    } else {
        dataset["path"] = cfg.dataset.path;
    }
    std::vector<std::string> algorithms;
    for (auto a : cfg.algorithms) algorithms.push_back(unlearn::algorithm_name(a));
    j = nlohmann::json{
        {"dataset", dataset},
        {"split", {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}}},
        {"forget_grouping", data::grouping_name(cfg.forget_grouping)},
        {"arch", cfg.arch},
        {"train", cfg.train},
        {"forget_fractions", cfg.forget_fractions},
        {"algorithms", algorithms},
        {"unlearn",
         {{"epochs", cfg.unlearn_epochs},
          {"batch_size", cfg.unlearn_batch_size},
          {"eta_min_factor", cfg.unlearn_eta_min_factor},
          {"relabel_policy", unlearn::policy_name(cfg.relabel_policy)}}},
        {"sweep", {{"lr", cfg.sweep.lr}, {"threshold", cfg.sweep.threshold}}},
        {"repeats", cfg.repeats},
        {"base_seed", cfg.base_seed},
        {"group_names", cfg.group_names},
        {"jobs", cfg.jobs},
        {"output_dir", cfg.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    try {
        ExperimentConfig d = default_config();
        if (j.contains("dataset")) {
            const auto& ds = j.at("dataset");
            d.dataset = DatasetSource{};
            if (ds.contains("synthetic")) {
                d.dataset.synthetic = ds.at("synthetic").get<data::SyntheticSpec>();
            } else if (ds.contains("path")) {
                d.dataset.path = ds.at("path").get<std::string>();
            } else {
                throw ConfigError("dataset needs a \"synthetic\" or \"path\" entry");
            }
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            d.split.train = s.value("train", d.split.train);
            d.split.val = s.value("val", d.split.val);
            d.split.test = s.value("test", d.split.test);
        }
        if (j.contains("forget_grouping")) {
            d.forget_grouping = data::grouping_from_name(j.at("forget_grouping").get<std::string>());
        }
        if (j.contains("arch")) d.arch = j.at("arch").get<nn::ArchSpec>();
        if (j.contains("train")) d.train = j.at("train").get<optim::TrainConfig>();
        d.forget_fractions = j.value("forget_fractions", d.forget_fractions);
        if (j.contains("algorithms")) {
            d.algorithms.clear();
            for (const auto& name : j.at("algorithms")) {
                d.algorithms.push_back(unlearn::algorithm_from_name(name.get<std::string>()));
            }
        }
        if (j.contains("unlearn")) {
            const auto& u = j.at("unlearn");
            d.unlearn_epochs = u.value("epochs", d.unlearn_epochs);
            d.unlearn_batch_size = u.value("batch_size", d.unlearn_batch_size);
            d.unlearn_eta_min_factor = u.value("eta_min_factor", d.unlearn_eta_min_factor);
            if (u.contains("relabel_policy")) {
                d.relabel_policy = unlearn::policy_from_name(u.at("relabel_policy").get<std::string>());
            }
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            d.sweep.lr = s.value("lr", d.sweep.lr);
            d.sweep.threshold = s.value("threshold", d.sweep.threshold);
        }
        d.repeats = j.value("repeats", d.repeats);
        d.base_seed = j.value("base_seed", d.base_seed);
        d.group_names = j.value("group_names", d.group_names);
        d.jobs = j.value("jobs", d.jobs);
        d.output_dir = j.value("output_dir", d.output_dir);
        cfg = std::move(d);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    ExperimentConfig cfg = j.get<ExperimentConfig>();
    validate(cfg);
    return cfg;
}

}  // namespace mulab::harness
