#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mulab/data/dataset_io.hpp"
#include "mulab/data/synthetic.hpp"
#include "mulab/error.hpp"
#include "mulab/harness/config.hpp"
#include "mulab/harness/experiment.hpp"
#include "mulab/harness/report.hpp"
#include "mulab/metrics/metrics.hpp"
#include "mulab/nn/model_io.hpp"

using namespace mulab;
using nlohmann::json;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::size_t> repeats,
            std::optional<std::uint64_t> base_seed, std::optional<std::size_t> jobs) {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    if (repeats) cfg.repeats = *repeats;
    if (base_seed) cfg.base_seed = *base_seed;
    if (jobs) cfg.jobs = *jobs;
    cfg.output_dir = out_dir;
    const auto report = harness::run_experiment(cfg);
    harness::emit_report(report, out_dir);
    std::cout << harness::forget_size_csv(report);
    for (const auto& i : report.incomplete) {
        std::cerr << "incomplete: " << unlearn::algorithm_name(i.algorithm) << " fraction "
                  << harness::fraction_label(i.fraction) << " repeat " << i.repeat << ": " << i.error << '\n';
    }
    std::cerr << "report written to " << out_dir << '\n';
    return 0;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_path) {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot open spec file " + spec_path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("spec file " + spec_path + " is not valid JSON: " + e.what());
    }
    const auto spec = j.get<data::SyntheticSpec>();
    const auto ds = data::generate_synthetic(spec);
    data::save_dataset(ds, out_path);
    std::cout << "wrote " << ds.size() << " samples to " << out_path << '\n';
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
    const auto model = nn::load_model(model_path);
    auto ds = data::load_dataset(data_path);
    if (ds.has_unknown_labels()) ds = data::apply_u_one(std::move(ds));
    const auto r = metrics::evaluate(model, ds, "eval");
    json per_class = json::object();
    for (const auto& [c, v] : r.per_class) per_class[std::to_string(c)] = 100.0 * v;
    json per_group = json::object();
    for (const auto& [g, v] : r.per_group) per_group[std::to_string(g)] = 100.0 * v;
    json out{{"n", r.n_samples},
             {"macro_auroc", std::isfinite(r.macro_auroc) ? json(100.0 * r.macro_auroc) : json(nullptr)},
             {"per_class", per_class},
             {"per_group", per_group},
             {"skipped_classes", r.skipped_classes}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_report(const std::string& in_dir, const std::string& format) {
    const auto report = harness::read_report(in_dir);
    if (format == "json") {
        json j = harness::report_to_json(report);
        j["timing"] = harness::timing_to_json(report);
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    std::vector<double> fractions;
    for (const auto& c : report.cells) {
        if (std::find(fractions.begin(), fractions.end(), c.fraction) == fractions.end()) fractions.push_back(c.fraction);
    }
    std::cout << "# forget_size\n" << harness::forget_size_csv(report);
    for (double f : fractions) {
        std::cout << "\n# per_class " << harness::fraction_label(f) << '\n' << harness::per_class_csv(report, f);
        std::cout << "\n# fairness " << harness::fraction_label(f) << '\n' << harness::fairness_csv(report, f);
    }
    std::cout << "\n# efficiency\n" << harness::efficiency_csv(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Machine-unlearning lab: exact unlearning, random relabeling and saliency unlearning"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::size_t> repeats, jobs;
    std::optional<std::uint64_t> base_seed;
    auto* run = app.add_subcommand("run", "Run an experiment and write its report");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--repeats", repeats, "Override the number of repeats");
    run->add_option("--base-seed", base_seed, "Override the base seed");
    run->add_option("--jobs", jobs, "Repeats run concurrently");

    std::string spec_path, data_out;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
    gen->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", data_out, "Dataset file to write")->required();

    std::string model_path, data_path;
    auto* ev = app.add_subcommand("eval", "Evaluate a saved model on a dataset file");
    ev->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data_path, "Dataset file")->required()->check(CLI::ExistingFile);

    std::string in_dir, format = "csv";
    auto* rep = app.add_subcommand("report", "Print the tables of a finished run");
    rep->add_option("--in", in_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto* defaults = app.add_subcommand("default-config", "Print the default experiment config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, out_dir, repeats, base_seed, jobs);
        if (*gen) return cmd_gen_data(spec_path, data_out);
        if (*ev) return cmd_eval(model_path, data_path);
        if (*rep) return cmd_report(in_dir, format);
        if (*defaults) {
            std::cout << json(harness::default_config()).dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
