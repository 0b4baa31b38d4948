#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mulab/error.hpp"
#include "mulab/harness/report.hpp"

namespace mulab::harness {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kRoles[] = {"easy", "intermediate", "hard"};
constexpr const char* kSets[] = {"retain", "forget", "test"};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}
template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json eval_json(const metrics::EvalResult& e) {
    json per_class = json::object();
    for (const auto& [c, v] : e.per_class) per_class[std::to_string(c)] = num(v);
    json per_group = json::object();
    for (const auto& [g, v] : e.per_group) per_group[std::to_string(g)] = num(v);
    return json{{"set", e.set_name},       {"macro", num(e.macro_auroc)}, {"per_class", per_class},
                {"per_group", per_group}, {"n", e.n_samples},           {"skipped", e.skipped_classes}};
}

metrics::EvalResult eval_from(const json& j) {
    metrics::EvalResult e;
    e.set_name = j.at("set").get<std::string>();
    e.macro_auroc = num_from(j.at("macro"));
    for (const auto& [k, v] : j.at("per_class").items()) e.per_class[std::stoul(k)] = num_from(v);
    for (const auto& [k, v] : j.at("per_group").items()) {
        e.per_group[static_cast<std::uint8_t>(std::stoul(k))] = num_from(v);
    }
    e.n_samples = j.at("n").get<std::size_t>();
    e.skipped_classes = j.at("skipped").get<std::size_t>();
    return e;
}

json stat_json(const Stat& s) {
    return json{{"mean", num(s.mean)}, {"std", num(s.std)}, {"n", s.n}, {"single", s.single}};
}

Stat stat_from(const json& j) {
    return Stat{num_from(j.at("mean")), num_from(j.at("std")), j.at("n").get<std::size_t>(),
                j.at("single").get<bool>()};
}

json summary_json(const SetSummary& s) {
    json per_class = json::object();
    for (const auto& [k, v] : s.per_class) per_class[k] = stat_json(v);
    json per_group = json::object();
    for (const auto& [k, v] : s.per_group) per_group[k] = stat_json(v);
    return json{{"macro", stat_json(s.macro)}, {"per_class", per_class}, {"per_group", per_group}};
}

SetSummary summary_from(const json& j) {
    SetSummary s;
    s.macro = stat_from(j.at("macro"));
    for (const auto& [k, v] : j.at("per_class").items()) s.per_class[k] = stat_from(v);
    for (const auto& [k, v] : j.at("per_group").items()) s.per_group[k] = stat_from(v);
    return s;
}

json run_json(const RunRecord& r) {
    return json{{"repeat", r.repeat},       {"seed", r.seed},
                {"lr", opt(r.lr)},          {"threshold", opt(r.threshold)},
                {"mask_ones", opt(r.mask_ones)}, {"retain", eval_json(r.retain)},
                {"forget", eval_json(r.forget)}, {"test", eval_json(r.test)}};
}

RunRecord run_from(const json& j) {
    RunRecord r;
    r.repeat = j.at("repeat").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.lr = opt_from<double>(j, "lr");
    r.threshold = opt_from<double>(j, "threshold");
    r.mask_ones = opt_from<std::size_t>(j, "mask_ones");
    r.retain = eval_from(j.at("retain"));
    r.forget = eval_from(j.at("forget"));
    r.test = eval_from(j.at("test"));
    return r;
}

json pretrained_json(const PretrainedRecord& p) {
    json ranking = nullptr;
    if (p.ranking) {
        ranking = json{{"order", p.ranking->order},
                       {"easy", p.ranking->easy},
                       {"intermediate", p.ranking->intermediate},
                       {"hard", p.ranking->hard}};
    }
    return json{{"repeat", p.repeat},         {"split_seed", p.split_seed}, {"init_seed", p.init_seed},
                {"train_seed", p.train_seed}, {"train_size", p.train_size}, {"val_size", p.val_size},
                {"test_size", p.test_size},   {"test", eval_json(p.test)},  {"ranking", ranking}};
}

PretrainedRecord pretrained_from(const json& j) {
    PretrainedRecord p;
    p.repeat = j.at("repeat").get<std::size_t>();
    p.split_seed = j.at("split_seed").get<std::uint64_t>();
    p.init_seed = j.at("init_seed").get<std::uint64_t>();
    p.train_seed = j.at("train_seed").get<std::uint64_t>();
    p.train_size = j.at("train_size").get<std::size_t>();
    p.val_size = j.at("val_size").get<std::size_t>();
    p.test_size = j.at("test_size").get<std::size_t>();
    p.test = eval_from(j.at("test"));
    if (!j.at("ranking").is_null()) {
        const auto& r = j.at("ranking");
        p.ranking = metrics::DifficultyRanking{r.at("order").get<std::vector<std::size_t>>(),
                                               r.at("easy").get<std::size_t>(),
                                               r.at("intermediate").get<std::size_t>(),
                                               r.at("hard").get<std::size_t>()};
    }
    return p;
}

json sweep_json(const SweepPoint& p) {
    return json{{"algorithm", unlearn::algorithm_name(p.algorithm)},
                {"fraction", p.fraction},
                {"repeat", p.repeat},
                {"lr", p.lr},
                {"threshold", opt(p.threshold)},
                {"retain", num(p.retain)},
                {"forget", num(p.forget)},
                {"test", num(p.test)},
                {"forget_gap", num(p.forget_gap)},
                {"selected", p.selected},
                {"error", p.error}};
}

SweepPoint sweep_from(const json& j) {
    SweepPoint p;
    p.algorithm = unlearn::algorithm_from_name(j.at("algorithm").get<std::string>());
    p.fraction = j.at("fraction").get<double>();
    p.repeat = j.at("repeat").get<std::size_t>();
    p.lr = j.at("lr").get<double>();
    p.threshold = opt_from<double>(j, "threshold");
    p.retain = num_from(j.at("retain"));
    p.forget = num_from(j.at("forget"));
    p.test = num_from(j.at("test"));
    p.forget_gap = num_from(j.at("forget_gap"));
    p.selected = j.at("selected").get<bool>();
    p.error = j.at("error").get<std::string>();
    return p;
}

std::string pp(const Stat& s) {
    if (s.n == 0 || !std::isfinite(s.mean)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f±%.2f", s.mean, s.std);
    return buf;
}

std::string fixed(double v, int digits) {
    if (!std::isfinite(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string gnum(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::vector<unlearn::Algorithm> algorithms_of(const UnlearnReport& r) {
    std::vector<unlearn::Algorithm> out;
    for (const auto& c : r.cells) {
        if (std::find(out.begin(), out.end(), c.algorithm) == out.end()) out.push_back(c.algorithm);
    }
    return out;
}

std::vector<double> fractions_of(const UnlearnReport& r) {
    std::vector<double> out;
    if (r.config.is_object() && r.config.contains("forget_fractions")) {
        out = r.config.at("forget_fractions").get<std::vector<double>>();
    }
    for (const auto& c : r.cells) {
        if (std::find(out.begin(), out.end(), c.fraction) == out.end()) out.push_back(c.fraction);
    }
    return out;
}

const SetSummary& set_of(const CellReport& c, std::size_t k) {
    return k == 0 ? c.retain : k == 1 ? c.forget : c.test;
}

}  // namespace

Stat summarize(const std::vector<double>& values) {
    std::vector<double> v;
    for (double x : values) {
        if (std::isfinite(x)) v.push_back(100.0 * x);
    }
    Stat s;
    s.n = v.size();
    s.single = v.size() < 2;
    if (v.empty()) {
        s.mean = kNaN;
        return s;
    }
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

const CellReport* UnlearnReport::find_cell(unlearn::Algorithm a, double fraction) const {
    for (const auto& c : cells) {
        if (c.algorithm == a && c.fraction == fraction) return &c;
    }
    return nullptr;
}

std::string fraction_label(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", fraction);
    return buf;
}

std::vector<EfficiencyRow> efficiency(const UnlearnReport& report) {
    std::vector<EfficiencyRow> rows;
    auto mean_of = [&](const std::string& stage, unlearn::Algorithm a, double f, bool sum) {
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& t : report.timing) {
            if (t.stage == stage && t.algorithm == a && t.fraction == f) {
                total += t.seconds;
                ++n;
            }
        }
        if (n == 0) return kNaN;
        return sum ? total : total / static_cast<double>(n);
    };
    for (double f : fractions_of(report)) {
        const double exact = mean_of("exact", unlearn::Algorithm::Exact, f, false);
        for (auto a : {unlearn::Algorithm::Relabel, unlearn::Algorithm::Salun}) {
            const double run = mean_of("unlearn", a, f, false);
            if (!std::isfinite(run)) continue;
            EfficiencyRow row;
            row.algorithm = a;
            row.fraction = f;
            row.run_seconds = run;
            row.exact_seconds = exact;
            row.ratio = run / exact;
            row.sweep_seconds = mean_of("sweep", a, f, true);
            row.faster_than_exact = std::isfinite(exact) && run < exact;
            rows.push_back(row);
        }
    }
    return rows;
}

json report_to_json(const UnlearnReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        json runs = json::array();
        for (const auto& r : c.runs) runs.push_back(run_json(r));
        cells.push_back(json{{"algorithm", unlearn::algorithm_name(c.algorithm)},
                             {"fraction", c.fraction},
                             {"runs", runs},
                             {"retain", summary_json(c.retain)},
                             {"forget", summary_json(c.forget)},
                             {"test", summary_json(c.test)}});
    }
    json pretrained = json::array();
    for (const auto& p : report.pretrained) pretrained.push_back(pretrained_json(p));
    json sweep = json::array();
    for (const auto& p : report.sweep) sweep.push_back(sweep_json(p));
    json incomplete = json::array();
    for (const auto& i : report.incomplete) {
        incomplete.push_back(json{{"algorithm", unlearn::algorithm_name(i.algorithm)},
                                  {"fraction", i.fraction},
                                  {"repeat", i.repeat},
                                  {"error", i.error}});
    }
    return json{{"format", "mulab-report"}, {"version", 1},        {"config", report.config},
                {"pretrained", pretrained}, {"cells", cells},      {"sweep", sweep},
                {"incomplete", incomplete}};
}

json timing_to_json(const UnlearnReport& report) {
    json entries = json::array();
    for (const auto& t : report.timing) {
        entries.push_back(json{{"stage", t.stage},
                               {"algorithm", t.algorithm ? json(unlearn::algorithm_name(*t.algorithm)) : json(nullptr)},
                               {"fraction", opt(t.fraction)},
                               {"repeat", t.repeat},
                               {"seconds", t.seconds}});
    }
    json rows = json::array();
    for (const auto& e : efficiency(report)) {
        rows.push_back(json{{"algorithm", unlearn::algorithm_name(e.algorithm)},
                            {"fraction", e.fraction},
                            {"run_seconds", num(e.run_seconds)},
                            {"exact_seconds", num(e.exact_seconds)},
                            {"ratio", num(e.ratio)},
                            {"sweep_seconds", num(e.sweep_seconds)},
                            {"faster_than_exact", e.faster_than_exact}});
    }
    return json{{"entries", entries}, {"efficiency", rows}};
}

UnlearnReport report_from_json(const json& j, const json& timing) {
    try {
        if (!j.is_object() || j.value("format", std::string()) != "mulab-report") {
            throw FormatError("not a mulab report");
        }
        UnlearnReport r;
        r.config = j.at("config");
        for (const auto& p : j.at("pretrained")) r.pretrained.push_back(pretrained_from(p));
        for (const auto& c : j.at("cells")) {
            CellReport cell;
            cell.algorithm = unlearn::algorithm_from_name(c.at("algorithm").get<std::string>());
            cell.fraction = c.at("fraction").get<double>();
            for (const auto& run : c.at("runs")) cell.runs.push_back(run_from(run));
            cell.retain = summary_from(c.at("retain"));
            cell.forget = summary_from(c.at("forget"));
            cell.test = summary_from(c.at("test"));
            r.cells.push_back(std::move(cell));
        }
        for (const auto& p : j.at("sweep")) r.sweep.push_back(sweep_from(p));
        for (const auto& i : j.at("incomplete")) {
            r.incomplete.push_back(IncompleteCell{unlearn::algorithm_from_name(i.at("algorithm").get<std::string>()),
                                                  i.at("fraction").get<double>(), i.at("repeat").get<std::size_t>(),
                                                  i.at("error").get<std::string>()});
        }
        if (timing.is_object()) {
            for (const auto& t : timing.at("entries")) {
                TimingEntry e;
                e.stage = t.at("stage").get<std::string>();
                if (!t.at("algorithm").is_null()) {
                    e.algorithm = unlearn::algorithm_from_name(t.at("algorithm").get<std::string>());
                }
                e.fraction = opt_from<double>(t, "fraction");
                e.repeat = t.at("repeat").get<std::size_t>();
                e.seconds = t.at("seconds").get<double>();
                r.timing.push_back(std::move(e));
            }
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

std::string forget_size_csv(const UnlearnReport& report) {
    const auto fractions = fractions_of(report);
    std::ostringstream os;
    os << "algorithm";
    for (double f : fractions) {
        for (const char* set : kSets) os << ',' << set << '@' << fraction_label(f);
    }
    os << '\n';
    for (auto a : algorithms_of(report)) {
        os << unlearn::algorithm_name(a);
        for (double f : fractions) {
            const CellReport* c = report.find_cell(a, f);
            for (std::size_t k = 0; k < 3; ++k) os << ',' << (c ? pp(set_of(*c, k).macro) : "n/a");
        }
        os << '\n';
    }
    return os.str();
}

std::string per_class_csv(const UnlearnReport& report, double fraction) {
    std::ostringstream os;
    os << "algorithm";
    for (const char* role : kRoles) {
        for (const char* set : kSets) os << ',' << role << '_' << set;
    }
    os << '\n';
    for (auto a : algorithms_of(report)) {
        const CellReport* c = report.find_cell(a, fraction);
        if (!c) continue;
        os << unlearn::algorithm_name(a);
        for (const char* role : kRoles) {
            for (std::size_t k = 0; k < 3; ++k) {
                const auto& m = set_of(*c, k).per_class;
                const auto it = m.find(role);
                os << ',' << (it == m.end() ? "n/a" : pp(it->second));
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string fairness_csv(const UnlearnReport& report, double fraction) {
    std::vector<std::string> groups;
    if (report.config.is_object() && report.config.contains("group_names")) {
        groups = report.config.at("group_names").get<std::vector<std::string>>();
    }
    for (const auto& c : report.cells) {
        if (c.fraction != fraction) continue;
        for (const auto& [g, s] : c.test.per_group) {
            if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
        }
    }
    std::ostringstream os;
    os << "algorithm";
    for (const auto& g : groups) {
        for (const char* set : kSets) os << ',' << g << '_' << set;
    }
    if (groups.size() == 2) os << ",test_gap";
    os << '\n';
    for (auto a : algorithms_of(report)) {
        const CellReport* c = report.find_cell(a, fraction);
        if (!c) continue;
        os << unlearn::algorithm_name(a);
        for (const auto& g : groups) {
            for (std::size_t k = 0; k < 3; ++k) {
                const auto& m = set_of(*c, k).per_group;
                const auto it = m.find(g);
                os << ',' << (it == m.end() ? "n/a" : pp(it->second));
            }
        }
        if (groups.size() == 2) {
            const auto a0 = c->test.per_group.find(groups[0]);
            const auto a1 = c->test.per_group.find(groups[1]);
            os << ',';
            if (a0 != c->test.per_group.end() && a1 != c->test.per_group.end()) {
                os << fixed(std::abs(a0->second.mean - a1->second.mean), 2);
            }
        }
        os << '\n';
    }
    return os.str();
}

std::string sweep_csv(const UnlearnReport& report) {
    std::ostringstream os;
    os << "algorithm,fraction,repeat,lr,threshold,retain,forget,test,forget_gap,selected,error\n";
    for (const auto& p : report.sweep) {
        os << unlearn::algorithm_name(p.algorithm) << ',' << fraction_label(p.fraction) << ',' << p.repeat << ','
           << gnum(p.lr) << ',' << (p.threshold ? gnum(*p.threshold) : "") << ',' << fixed(100.0 * p.retain, 4)
           << ',' << fixed(100.0 * p.forget, 4) << ',' << fixed(100.0 * p.test, 4) << ','
           << fixed(100.0 * p.forget_gap, 4) << ',' << (p.selected ? 1 : 0) << ',';
        std::string err = p.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << err << '\n';
    }
    return os.str();
}

std::string efficiency_csv(const UnlearnReport& report) {
    std::ostringstream os;
    os << "algorithm,fraction,run_seconds,exact_seconds,ratio,sweep_seconds,faster_than_exact\n";
    for (const auto& e : efficiency(report)) {
        os << unlearn::algorithm_name(e.algorithm) << ',' << fraction_label(e.fraction) << ','
           << fixed(e.run_seconds, 4) << ',' << fixed(e.exact_seconds, 4) << ',' << fixed(e.ratio, 4) << ','
           << fixed(e.sweep_seconds, 4) << ',' << (e.faster_than_exact ? 1 : 0) << '\n';
    }
    return os.str();
}

std::vector<std::filesystem::path> emit_report(const UnlearnReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& content) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        out << content;
        out.close();
        if (!out) throw Error("cannot write " + path.string());
        written.push_back(path);
    };
    put("report.json", report_to_json(report).dump(2) + "\n");
    put("timing.json", timing_to_json(report).dump(2) + "\n");
    put("forget_size.csv", forget_size_csv(report));
    for (double f : fractions_of(report)) {
        put("per_class_" + fraction_label(f) + ".csv", per_class_csv(report, f));
        put("fairness_" + fraction_label(f) + ".csv", fairness_csv(report, f));
    }
    put("sweep.csv", sweep_csv(report));
    put("efficiency.csv", efficiency_csv(report));
    return written;
}

UnlearnReport read_report(const std::filesystem::path& dir) {
    auto parse = [](const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open " + path.string());
        try {
            return json::parse(in);
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + " is not valid JSON: " + e.what());
        }
    };
    const json report = parse(dir / "report.json");
    const json timing = std::filesystem::exists(dir / "timing.json") ? parse(dir / "timing.json") : json();
    return report_from_json(report, timing);
}

}  // namespace mulab::harness
