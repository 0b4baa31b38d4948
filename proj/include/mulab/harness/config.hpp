#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mulab/data/split.hpp"
#include "mulab/data/synthetic.hpp"
#include "mulab/nn/arch.hpp"
#include "mulab/optim/optim.hpp"
#include "mulab/unlearn/unlearn.hpp"

namespace mulab::harness {

// Exactly one of synthetic / path is used; synthetic wins when both are set.
struct DatasetSource {
    std::optional<data::SyntheticSpec> synthetic;
    std::string path;
};

struct SweepGrid {
    std::vector<double> lr;
    std::vector<double> threshold;  // salun only
};

struct ExperimentConfig {
    DatasetSource dataset;
    data::SplitFractions split{0.45, 0.05, 0.5};
    data::Grouping forget_grouping = data::Grouping::PatientLevel;
    nn::ArchSpec arch;
    optim::TrainConfig train;
    std::vector<double> forget_fractions{0.05, 0.15, 0.30};
    std::vector<unlearn::Algorithm> algorithms{unlearn::Algorithm::Exact, unlearn::Algorithm::Relabel,
                                               unlearn::Algorithm::Salun};
    std::size_t unlearn_epochs = 2;
    std::size_t unlearn_batch_size = 32;
    double unlearn_eta_min_factor = 0.1;
    unlearn::RelabelPolicy relabel_policy = unlearn::RelabelPolicy::Default;
    SweepGrid sweep;
    std::size_t repeats = 3;
    std::uint64_t base_seed = 1;
    std::vector<std::string> group_names{"male", "female"};
    std::size_t jobs = 1;
    std::string output_dir;
};

// The 3-class 16x16 synthetic fixture with a small conv net.
data::SyntheticSpec default_fixture_spec();
nn::ArchSpec default_fixture_arch();
ExperimentConfig default_config();

// Throws ConfigError on the first violated invariant.
void validate(const ExperimentConfig& cfg);

bool has_approximate(const ExperimentConfig& cfg);
std::string group_name(const ExperimentConfig& cfg, std::uint8_t group);

// Missing keys keep their default_config() values.
void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace mulab::harness
