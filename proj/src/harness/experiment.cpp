#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <thread>

#include "mulab/data/dataset_io.hpp"
#include "mulab/data/split.hpp"
#include "mulab/data/synthetic.hpp"
#include "mulab/error.hpp"
#include "mulab/harness/experiment.hpp"
#include "mulab/nn/model_io.hpp"
#include "mulab/optim/optim.hpp"
#include "mulab/rng.hpp"

namespace mulab::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Fractions enter seed paths as integer parts-per-million.
std::uint64_t fraction_key(double fraction) { return static_cast<std::uint64_t>(std::llround(fraction * 1e6)); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellRun {
    unlearn::Algorithm algorithm;
    double fraction;
    RunRecord record;
};

struct RepeatOutput {
    std::optional<PretrainedRecord> pretrained;
    std::vector<CellRun> runs;
    std::vector<SweepPoint> sweep;
    std::vector<IncompleteCell> incomplete;
    std::vector<TimingEntry> timing;
};

bool requested(const ExperimentConfig& cfg, unlearn::Algorithm a) {
    for (auto x : cfg.algorithms) {
        if (x == a) return true;
    }
    return false;
}

void mark_incomplete(RepeatOutput& out, const ExperimentConfig& cfg, std::size_t repeat,
                     const std::vector<double>& fractions, const std::string& error, bool approximate_only = false) {
    for (double f : fractions) {
        for (auto a : cfg.algorithms) {
            if (approximate_only && a == unlearn::Algorithm::Exact) continue;
            out.incomplete.push_back(IncompleteCell{a, f, repeat, error});
        }
    }
}

RunRecord evaluate_run(const nn::ModelState& model, std::size_t repeat, std::uint64_t seed,
                       const data::LabeledDataset& retain, const data::LabeledDataset& forget,
                       const data::LabeledDataset& test) {
    RunRecord r;
    r.repeat = repeat;
    r.seed = seed;
    r.retain = metrics::evaluate(model, retain, "retain");
    r.forget = metrics::evaluate(model, forget, "forget");
    r.test = metrics::evaluate(model, test, "test");
    return r;
}

// Written to <output_dir>/models when an output directory is configured.
void save_run_model(const ExperimentConfig& cfg, const nn::ModelState& model, const std::string& name) {
    if (cfg.output_dir.empty()) return;
    const auto dir = std::filesystem::path(cfg.output_dir) / "models";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    nn::save_model(model, dir / (name + ".model"));
}

std::string run_name(unlearn::Algorithm alg, double fraction, std::size_t repeat) {
    return unlearn::algorithm_name(alg) + "_f" + fraction_label(fraction) + "_r" + std::to_string(repeat);
}

void run_fraction(const ExperimentConfig& cfg, const data::LabeledDataset& ds, const data::SplitPlan& plan,
                  const nn::ModelState& pretrained, const optim::TrainConfig& train_cfg,
                  const data::LabeledDataset& test, std::size_t repeat, double fraction, RepeatOutput& out) {
    data::LabeledDataset forget;
    data::LabeledDataset retain;
    try {
        const auto fplan = data::split_forget_retain(ds, plan, fraction, cfg.forget_grouping,
                                                     forget_seed(cfg.base_seed, repeat, fraction));
        forget = data::subset(ds, fplan.forget_ids);
        retain = data::subset(ds, fplan.retain_ids);
    } catch (const Error& e) {
        mark_incomplete(out, cfg, repeat, {fraction}, std::string("forget split failed: ") + e.what());
        return;
    }

    std::optional<metrics::EvalResult> exact_forget;
    if (requested(cfg, unlearn::Algorithm::Exact) || has_approximate(cfg)) {
        try {
            optim::TrainConfig etc = train_cfg;
            etc.seed = exact_train_seed(cfg.base_seed, repeat, fraction);
            const std::uint64_t init_seed = exact_init_seed(cfg.base_seed, repeat, fraction);
            const auto t0 = Clock::now();
            const auto model = unlearn::exact_unlearn(pretrained, retain, etc, init_seed);
            const double secs = seconds_since(t0);
            auto record = evaluate_run(model, repeat, init_seed, retain, forget, test);
            exact_forget = record.forget;
            if (requested(cfg, unlearn::Algorithm::Exact)) {
                save_run_model(cfg, model, run_name(unlearn::Algorithm::Exact, fraction, repeat));
            }
            out.timing.push_back(TimingEntry{"exact", unlearn::Algorithm::Exact, fraction, repeat, secs});
            if (requested(cfg, unlearn::Algorithm::Exact)) {
                out.runs.push_back(CellRun{unlearn::Algorithm::Exact, fraction, std::move(record)});
            }
        } catch (const Error& e) {
            if (requested(cfg, unlearn::Algorithm::Exact)) {
                out.incomplete.push_back(IncompleteCell{unlearn::Algorithm::Exact, fraction, repeat, e.what()});
            }
            mark_incomplete(out, cfg, repeat, {fraction}, std::string("no exact reference: ") + e.what(), true);
            return;
        }
    }

    for (auto alg : cfg.algorithms) {
        if (alg == unlearn::Algorithm::Exact) continue;
        try {
            unlearn::UnlearnConfig base;
            base.algorithm = alg;
            base.epochs = cfg.unlearn_epochs;
            base.batch_size = cfg.unlearn_batch_size;
            base.eta_min_factor = cfg.unlearn_eta_min_factor;
            base.relabel_policy = cfg.relabel_policy;
            base.seed = unlearn_run_seed(cfg.base_seed, repeat, fraction);
            auto outcome = sweep_hparams(pretrained, forget, retain, test, alg, cfg.sweep, *exact_forget, base);
            for (auto& p : outcome.table) {
                p.fraction = fraction;
                p.repeat = repeat;
                out.sweep.push_back(p);
            }
            auto record = evaluate_run(outcome.best_model, repeat, base.seed, retain, forget, test);
            record.lr = outcome.best_cfg.lr;
            record.threshold = outcome.best_cfg.threshold;
            if (alg == unlearn::Algorithm::Salun) record.mask_ones = outcome.best_mask_ones;
            save_run_model(cfg, outcome.best_model, run_name(alg, fraction, repeat));
            out.runs.push_back(CellRun{alg, fraction, std::move(record)});
            out.timing.push_back(TimingEntry{"unlearn", alg, fraction, repeat, outcome.best_seconds});
            out.timing.push_back(TimingEntry{"sweep", alg, fraction, repeat, outcome.seconds});
        } catch (const Error& e) {
            out.incomplete.push_back(IncompleteCell{alg, fraction, repeat, e.what()});
        }
    }
}

RepeatOutput run_repeat(const ExperimentConfig& cfg, const data::LabeledDataset& ds, std::size_t repeat) {
    RepeatOutput out;
    const RepeatSeeds seeds = repeat_seeds(cfg.base_seed, repeat);
    data::SplitPlan plan;
    data::LabeledDataset train;
    data::LabeledDataset test;
    nn::ModelState pretrained;
    optim::TrainConfig train_cfg = cfg.train;
    try {
        plan = data::split_train_val_test(ds, {cfg.split.train, cfg.split.val, cfg.split.test}, seeds.split,
                                          cfg.split.val == 0.0);
        train = data::subset(ds, plan.train_ids);
        test = data::subset(ds, plan.test_ids);
        train_cfg.loss_kind = optim::loss_kind_for(ds.task);
        train_cfg.seed = seeds.train;
        train_cfg.mask.clear();
        const auto t0 = Clock::now();
        pretrained = optim::train(nn::init_model(cfg.arch, seeds.init), train, train_cfg).model;
        out.timing.push_back(TimingEntry{"pretrain", std::nullopt, std::nullopt, repeat, seconds_since(t0)});
        save_run_model(cfg, pretrained, "pretrained_r" + std::to_string(repeat));

        PretrainedRecord rec;
        rec.repeat = repeat;
        rec.split_seed = seeds.split;
        rec.init_seed = seeds.init;
        rec.train_seed = seeds.train;
        rec.train_size = plan.train_ids.size();
        rec.val_size = plan.val_ids.size();
        rec.test_size = plan.test_ids.size();
        rec.test = metrics::evaluate(pretrained, test, "test");
        if (rec.test.per_class.size() >= 3) rec.ranking = metrics::rank_difficulty(rec.test.per_class);
        out.pretrained = std::move(rec);
    } catch (const Error& e) {
        mark_incomplete(out, cfg, repeat, cfg.forget_fractions, std::string("pretraining failed: ") + e.what());
        return out;
    }
    for (double f : cfg.forget_fractions) run_fraction(cfg, ds, plan, pretrained, train_cfg, test, repeat, f, out);
    return out;
}

SetSummary summarize_set(const std::vector<const RunRecord*>& runs,
                         const std::vector<std::optional<PretrainedRecord>>& pretrained,
                         const metrics::EvalResult RunRecord::*member, const ExperimentConfig& cfg) {
    SetSummary s;
    std::vector<double> macro;
    std::map<std::string, std::vector<double>> roles;
    std::map<std::uint8_t, std::vector<double>> groups;
    for (const RunRecord* run : runs) {
        const metrics::EvalResult& ev = run->*member;
        macro.push_back(ev.macro_auroc);
        const auto& pre = pretrained[run->repeat];
        if (pre && pre->ranking) {
            const std::pair<const char*, std::size_t> reps[] = {
                {"easy", pre->ranking->easy}, {"intermediate", pre->ranking->intermediate}, {"hard", pre->ranking->hard}};
            for (const auto& [role, cls] : reps) {
                if (auto it = ev.per_class.find(cls); it != ev.per_class.end()) roles[role].push_back(it->second);
            }
        }
        for (const auto& [g, v] : ev.per_group) groups[g].push_back(v);
    }
    s.macro = summarize(macro);
    for (const auto& [role, v] : roles) s.per_class[role] = summarize(v);
    for (const auto& [g, v] : groups) s.per_group[group_name(cfg, g)] = summarize(v);
    return s;
}

}  // namespace

RepeatSeeds repeat_seeds(std::uint64_t base_seed, std::size_t repeat) {
    return RepeatSeeds{derive_seed(base_seed, {tag_id("split")}),
                       derive_seed(base_seed, {tag_id("init"), repeat}),
                       derive_seed(base_seed, {tag_id("train"), repeat})};
}

std::uint64_t forget_seed(std::uint64_t base_seed, std::size_t repeat, double fraction) {
    return derive_seed(base_seed, {tag_id("forget"), repeat, fraction_key(fraction)});
}

std::uint64_t exact_init_seed(std::uint64_t base_seed, std::size_t repeat, double fraction) {
    return derive_seed(base_seed, {tag_id("exact-init"), repeat, fraction_key(fraction)});
}

std::uint64_t exact_train_seed(std::uint64_t base_seed, std::size_t repeat, double fraction) {
    return derive_seed(base_seed, {tag_id("exact-train"), repeat, fraction_key(fraction)});
}

std::uint64_t unlearn_run_seed(std::uint64_t base_seed, std::size_t repeat, double fraction) {
    return derive_seed(base_seed, {tag_id("unlearn"), repeat, fraction_key(fraction)});
}

std::size_t select_sweep_point(const std::vector<SweepPoint>& points) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!p.error.empty() || !std::isfinite(p.forget_gap)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = points[*best];
        const double pt = std::isfinite(p.test) ? p.test : -1.0;
        const double bt = std::isfinite(b.test) ? b.test : -1.0;
        bool better = false;
        if (p.forget_gap != b.forget_gap) {
            better = p.forget_gap < b.forget_gap;
        } else if (pt != bt) {
            better = pt > bt;
        } else if (p.lr != b.lr) {
            better = p.lr < b.lr;
        } else {
            better = p.threshold.value_or(0.0) < b.threshold.value_or(0.0);
        }
        if (better) best = i;
    }
    if (!best) throw Error("every sweep grid point failed");
    return *best;
}

SweepOutcome sweep_hparams(const nn::ModelState& pretrained, const data::LabeledDataset& forget,
                           const data::LabeledDataset& retain, const data::LabeledDataset& test,
                           unlearn::Algorithm algorithm, const SweepGrid& grid,
                           const metrics::EvalResult& exact_forget, const unlearn::UnlearnConfig& base_cfg) {
    if (algorithm == unlearn::Algorithm::Exact) throw ConfigError("exact unlearning has no hyper-parameter sweep");
    if (grid.lr.empty()) throw ConfigError("sweep grid has no learning rates");
    std::vector<std::optional<double>> thresholds;
    if (algorithm == unlearn::Algorithm::Salun) {
        if (grid.threshold.empty()) throw ConfigError("salun sweep grid has no thresholds");
        for (double t : grid.threshold) thresholds.emplace_back(t);
    } else {
        thresholds.emplace_back(std::nullopt);
    }

    SweepOutcome out;
    std::vector<nn::ModelState> models;
    std::vector<unlearn::UnlearnConfig> cfgs;
    std::vector<double> secs;
    std::vector<std::size_t> ones;
    // The saliency gradient depends only on the pretrained model and forget set.
    std::optional<nn::GradientVector> grad;
    double grad_seconds = 0.0;
    for (double lr : grid.lr) {
        for (const auto& thr : thresholds) {
            unlearn::UnlearnConfig cfg = base_cfg;
            cfg.algorithm = algorithm;
            cfg.lr = lr;
            cfg.threshold = thr;
            SweepPoint p;
            p.algorithm = algorithm;
            p.lr = lr;
            p.threshold = thr;
            nn::ModelState model;
            double elapsed = 0.0;
            std::size_t mask_ones = 0;
            try {
                unlearn::validate(cfg);
                if (algorithm == unlearn::Algorithm::Salun && !grad) {
                    const auto tg = Clock::now();
                    grad = unlearn::forget_gradient(pretrained, forget);
                    grad_seconds = seconds_since(tg);
                    out.seconds += grad_seconds;
                }
                const auto t0 = Clock::now();
                if (algorithm == unlearn::Algorithm::Salun) {
                    const auto mask = unlearn::mask_from_gradient(*grad, *thr);
                    mask_ones = mask.count_ones();
                    const auto noisy =
                        unlearn::random_relabel(forget, cfg.relabel_policy, unlearn::relabel_seed(cfg.seed));
                    model = unlearn::relabel_finetune(pretrained, retain, noisy, cfg, &mask);
                } else {
                    model = unlearn::random_relabel_unlearn(pretrained, forget, retain, cfg);
                }
                elapsed = seconds_since(t0);
                p.retain = metrics::evaluate(model, retain).macro_auroc;
                p.forget = metrics::evaluate(model, forget).macro_auroc;
                p.test = metrics::evaluate(model, test).macro_auroc;
                p.forget_gap = std::abs(p.forget - exact_forget.macro_auroc);
            } catch (const Error& e) {
                p.retain = p.forget = p.test = p.forget_gap = kNaN;
                p.error = e.what();
            }
            out.seconds += elapsed;
            out.table.push_back(std::move(p));
            models.push_back(std::move(model));
            cfgs.push_back(cfg);
            secs.push_back(elapsed);
            ones.push_back(mask_ones);
        }
    }
    out.best_index = select_sweep_point(out.table);
    out.table[out.best_index].selected = true;
    out.best_cfg = cfgs[out.best_index];
    out.best_model = std::move(models[out.best_index]);
    out.best_mask_ones = ones[out.best_index];
    // A standalone salun run also pays for its gradient pass.
    out.best_seconds = secs[out.best_index] + grad_seconds;
    return out;
}

data::LabeledDataset load_experiment_data(const ExperimentConfig& cfg) {
    data::LabeledDataset ds =
        cfg.dataset.synthetic ? data::generate_synthetic(*cfg.dataset.synthetic) : data::load_dataset(cfg.dataset.path);
    if (ds.has_unknown_labels()) ds = data::apply_u_one(std::move(ds));
    data::validate(ds, true);
    if (ds.task.count != cfg.arch.output_dim) {
        throw ConfigError("arch output_dim " + std::to_string(cfg.arch.output_dim) + " does not match the dataset's " +
                          std::to_string(ds.task.count) + " classes/labels");
    }
    return ds;
}

UnlearnReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const data::LabeledDataset ds = load_experiment_data(cfg);

    std::vector<RepeatOutput> outputs(cfg.repeats);
    const std::size_t workers = std::min(cfg.jobs, cfg.repeats);
    if (workers <= 1) {
        for (std::size_t r = 0; r < cfg.repeats; ++r) outputs[r] = run_repeat(cfg, ds, r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < cfg.repeats; r = next++) outputs[r] = run_repeat(cfg, ds, r);
            });
        }
        for (auto& t : pool) t.join();
    }

    UnlearnReport report;
    report.config = cfg;
    // Execution settings do not affect results.
    report.config.erase("output_dir");
    report.config.erase("jobs");
    std::vector<std::optional<PretrainedRecord>> pretrained(cfg.repeats);
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        pretrained[r] = outputs[r].pretrained;
        if (outputs[r].pretrained) report.pretrained.push_back(*outputs[r].pretrained);
    }
    for (auto alg : cfg.algorithms) {
        for (double f : cfg.forget_fractions) {
            CellReport cell;
            cell.algorithm = alg;
            cell.fraction = f;
            for (const auto& out : outputs) {
                for (const auto& run : out.runs) {
                    if (run.algorithm == alg && run.fraction == f) cell.runs.push_back(run.record);
                }
            }
            std::vector<const RunRecord*> ptrs;
            for (const auto& run : cell.runs) ptrs.push_back(&run);
            cell.retain = summarize_set(ptrs, pretrained, &RunRecord::retain, cfg);
            cell.forget = summarize_set(ptrs, pretrained, &RunRecord::forget, cfg);
            cell.test = summarize_set(ptrs, pretrained, &RunRecord::test, cfg);
            report.cells.push_back(std::move(cell));
        }
    }
    for (auto& out : outputs) {
        report.sweep.insert(report.sweep.end(), out.sweep.begin(), out.sweep.end());
        report.incomplete.insert(report.incomplete.end(), out.incomplete.begin(), out.incomplete.end());
        report.timing.insert(report.timing.end(), out.timing.begin(), out.timing.end());
    }
    return report;
}

}  // namespace mulab::harness
