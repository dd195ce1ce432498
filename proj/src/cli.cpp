#include "overfit/cli.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "overfit/calibration.hpp"
#include "overfit/error.hpp"
#include "overfit/io.hpp"

namespace overfit::cli {

namespace {

using io::format_double;
using io::json;

struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int paths = 0;
    int threads = 0;
    double annualize = 1.0;
    bool has_seed = false;
    bool has_paths = false;
    bool has_threads = false;
    bool has_annualize = false;
};

struct Artifact {
    std::string name;
    std::string content;
};

struct CommandOutput {
    std::vector<Artifact> artifacts;
    std::vector<io::InputFile> inputs;
    std::string summary;
    int status = 0;
};

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

json read_json_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path);
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
}

bool is_manifest(const json& j) {
    return j.is_object() && j.contains("resolved_config") && j.contains("command") && j.contains("inputs");
}

// Plain config, or the resolved config of a manifest after checking its inputs.
json load_config(const std::string& path, const std::string& command) {
    json j = read_json_file(path);
    if (!is_manifest(j)) {
        // Dataset paths are relative to the config file.
        if (j.is_object() && j.contains("data") && j.at("data").is_string()) {
            const std::filesystem::path data = j.at("data").get<std::string>();
            if (data.is_relative()) {
                j["data"] = (std::filesystem::absolute(path).parent_path() / data).lexically_normal().string();
            }
        }
        return j;
    }
    if (j.at("command") != command) {
        throw ValidationError(path + ": manifest was written by '" + j.at("command").get<std::string>() +
                              "', not '" + command + "'");
    }
    for (const auto& input : j.at("inputs")) {
        const std::string p = input.at("path").get<std::string>();
        if (io::sha256_file(p) != input.at("sha256").get<std::string>()) {
            throw ValidationError("input file changed since the manifest was written: " + p);
        }
    }
    return j.at("resolved_config");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config key '") + key + "' has the wrong type");
    }
}

json resolve(const std::string& command, json cfg, const Flags& f) {
    if (!cfg.is_object()) throw ValidationError("config: expected a JSON object");
    if (f.has_seed) cfg["seed"] = f.seed;
    if (!cfg.contains("seed")) cfg["seed"] = std::uint64_t{0};
    const json& seed = cfg.at("seed");
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
        throw ValidationError("config: seed must be a non-negative integer");
    }
    cfg["seed"] = seed.get<std::uint64_t>();
    if (f.has_threads) cfg["threads"] = f.threads;
    if (!cfg.contains("threads")) cfg["threads"] = 0;
    if (get_or(cfg, "threads", 0) < 0) throw ValidationError("threads must be >= 0");
    if (f.has_annualize) cfg["annualize"] = f.annualize;
    if (!cfg.contains("annualize")) cfg["annualize"] = 1;
    if (!(get_or(cfg, "annualize", 1.0) > 0.0)) throw ValidationError("annualize must be a positive number of periods");
    if (command == "resample") {
        if (!cfg.contains("resample")) cfg["resample"] = json::object();
        if (f.has_paths) cfg["resample"]["n_draws"] = f.paths;
        json r = io::to_json(io::resample_config_from_json(cfg.at("resample")));
        r["seed"] = cfg.at("seed");
        r["threads"] = cfg.at("threads");
        cfg["resample"] = r;
    } else if (command == "simulate" || command == "mc-check" || command == "epsilon") {
        if (f.has_paths) cfg["paths"] = f.paths;
        if (!cfg.contains("paths")) cfg["paths"] = 1000;
        if (get_or(cfg, "paths", 0) < 1) throw ValidationError("paths must be >= 1");
    }
    return cfg;
}

double multiplier(const json& cfg) { return std::sqrt(cfg.at("annualize").get<double>()); }

struct NamedSpec {
    std::string name;
    json model;
    json window;
    json simulation;
    json options;
};

std::vector<NamedSpec> spec_list(const json& cfg) {
    auto make = [&](const json& e, const std::string& fallback_name) {
        NamedSpec s;
        s.name = get_or<std::string>(e, "name", fallback_name);
        if (!e.contains("model")) throw ValidationError("spec '" + s.name + "': missing 'model'");
        s.model = e.at("model");
        s.window = e.contains("window") ? e.at("window") : cfg.value("window", json());
        if (s.window.is_null()) throw ValidationError("spec '" + s.name + "': missing 'window'");
        s.simulation = e.contains("simulation") ? e.at("simulation") : cfg.value("simulation", json::object());
        s.options = json::object();
        for (const char* key : {"fit", "cov", "keep_paths"}) {
            if (e.contains(key)) {
                s.options[key] = e.at(key);
            } else if (cfg.contains(key)) {
                s.options[key] = cfg.at(key);
            }
        }
        return s;
    };
    std::vector<NamedSpec> out;
    if (cfg.contains("specs")) {
        const json& list = cfg.at("specs");
        if (!list.is_array()) throw ValidationError("specs: expected an array");
        for (std::size_t i = 0; i < list.size(); ++i) out.push_back(make(list[i], "spec" + std::to_string(i)));
    } else {
        out.push_back(make(cfg, "spec0"));
    }
    return out;
}

std::string point_label(const NamedSpec& s) {
    std::string label = "spec '" + s.name + "'";
    if (s.window.is_object() && s.window.contains("t1") && s.window.contains("t2")) {
        label += " (t1=" + s.window.at("t1").dump() + ", t2=" + s.window.at("t2").dump() + ")";
    }
    return label;
}

template <typename F>
auto at_point(const std::string& label, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(label + ": " + e.what(), e.partial_value(), e.iterations());
    } catch (const NumericalError& e) {
        throw NumericalError(label + ": " + e.what());
    } catch (const UnreachableTargetError& e) {
        throw UnreachableTargetError(label + ": " + e.what(), e.supremum());
    } catch (const ValidationError& e) {
        throw ValidationError(label + ": " + e.what());
    }
}

std::vector<int> int_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of integers");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ValidationError(what + ": expected integers");
        out.push_back(v.get<int>());
    }
    return out;
}

std::vector<double> double_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ValidationError(what + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

const json& need(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
    return j.at(key);
}

CommandOutput cmd_analytic(const json& cfg) {
    const double ann = multiplier(cfg);
    CommandOutput out;
    std::string csv = io::csv_line({"name", "m", "p", "t1", "t2", "annualization", "is_mean", "oos_mean", "is_var",
                                    "oos_var", "sr_true", "sr_eis", "sr_eoos", "replication"});
    json results = json::array();
    std::map<std::string, ModelSpec> models;
    const auto specs = spec_list(cfg);
    for (const auto& s : specs) {
        at_point(point_label(s), [&] {
            const ModelSpec spec = io::model_from_json(s.model);
            const BacktestWindow w = io::window_from_json(s.window);
            check_window(w, spec.p());
            const AnalyticResult a = analyze(spec, w, ann);
            models[s.name] = spec;
            csv += io::csv_line({s.name, std::to_string(spec.m()), std::to_string(spec.p()), std::to_string(w.t1),
                                 std::to_string(w.t2), format_double(ann), format_double(a.moments.is_mean),
                                 format_double(a.moments.oos_mean), format_double(a.moments.is_var),
                                 format_double(a.moments.oos_var), format_double(a.sharpe.sr_true),
                                 format_double(a.sharpe.sr_eis), format_double(a.sharpe.sr_eoos),
                                 format_double(a.sharpe.replication_ratio)});
            results.push_back({{"name", s.name}, {"window", s.window}, {"result", io::to_json(a)}});
            return 0;
        });
    }
    out.artifacts.push_back({"analytic.csv", csv});
    out.artifacts.push_back({"analytic.json", results.dump(2) + "\n"});
    out.summary = csv;

    const json plots = cfg.value("plots", json::object());
    if (plots.contains("replication_vs_t1")) {
        const json& p = plots.at("replication_vs_t1");
        const std::string name = get_or<std::string>(p, "spec", specs.front().name);
        if (!models.count(name)) throw ValidationError("plots.replication_vs_t1: unknown spec '" + name + "'");
        const auto grid = int_list(need(p, "t1", "plots.replication_vs_t1"), "plots.replication_vs_t1.t1");
        const auto table = io::replication_vs_t1(models.at(name), grid, ann);
        out.artifacts.push_back({"replication_vs_t1.csv", io::emit_plot_data(table, io::PlotKind::ReplicationVsT1)});
    }
    if (plots.contains("replication_vs_p")) {
        const json& p = plots.at("replication_vs_p");
        const std::string where = "plots.replication_vs_p";
        const auto table = io::replication_vs_p(need(p, "sr_true", where).get<double>(), need(p, "m", where).get<int>(),
                                                need(p, "t1", where).get<int>(),
                                                int_list(need(p, "p", where), where + ".p"), ann);
        out.artifacts.push_back({"replication_vs_p.csv", io::emit_plot_data(table, io::PlotKind::ReplicationVsP)});
    }
    if (plots.contains("heatmap_sr_t1")) {
        const json& p = plots.at("heatmap_sr_t1");
        const std::string where = "plots.heatmap_sr_t1";
        const auto table = io::heatmap_sr_t1(double_list(need(p, "sr_true", where), where + ".sr_true"),
                                             int_list(need(p, "t1", where), where + ".t1"),
                                             get_or(p, "p", 1), get_or(p, "m", 1), ann);
        out.artifacts.push_back({"heatmap_sr_t1.csv", io::emit_plot_data(table, io::PlotKind::HeatmapSrT1)});
    }
    return out;
}

struct SimulatedSpec {
    NamedSpec named;
    ModelSpec spec;
    BacktestWindow window;
    ExperimentResult result;
};

std::vector<SimulatedSpec> run_simulations(const json& cfg) {
    std::vector<SimulatedSpec> out;
    const auto specs = spec_list(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const NamedSpec& s = specs[i];
        out.push_back(at_point(point_label(s), [&] {
            SimulatedSpec r;
            r.named = s;
            r.spec = io::model_from_json(s.model);
            r.window = io::window_from_json(s.window);
            SimulationConfig sim = io::simulation_config_from_json(s.simulation, r.spec);
            sim.n_paths = cfg.at("paths").get<int>();
            sim.seed = seed + i;
            sim.threads = cfg.at("threads").get<int>();
            const ExperimentOptions opts = io::experiment_options_from_json(s.options, r.spec);
            r.result = monte_carlo_experiment(r.spec, r.window, sim, opts);
            return r;
        }));
    }
    return out;
}

std::string paths_csv(const ExperimentResult& r) {
    std::string csv = io::csv_line({"path", "failed", "is_mean", "is_var", "is_sharpe", "oos_mean", "oos_var", "oos_sharpe"});
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
        const PathRecord& p = r.paths[i];
        csv += io::csv_line({std::to_string(i), p.failed ? "1" : "0", format_double(p.is.mean),
                             format_double(p.is.variance), format_double(p.is.sharpe), format_double(p.oos.mean),
                             format_double(p.oos.variance), format_double(p.oos.sharpe)});
    }
    return csv;
}

CommandOutput cmd_simulate(const json& cfg) {
    const double ann = multiplier(cfg);
    CommandOutput out;
    const auto sims = run_simulations(cfg);
    std::vector<std::string> header{"name", "m", "p", "t1", "t2", "n_paths", "failed_paths"};
    const std::vector<std::string> quantities{"is_mean", "oos_mean", "is_var", "oos_var",
                                              "sr_is", "sr_oos", "replication"};
    for (const auto& q : quantities) {
        header.push_back("analytic_" + q);
        header.push_back("sim_" + q);
        header.push_back("sim_" + q + "_se");
    }
    std::string csv = io::csv_line(header);
    json results = json::array();
    for (const auto& s : sims) {
        const ExperimentResult& r = s.result;
        const MomentSummary& m = r.analytic.moments;
        const SharpeReport sr = expected_sharpes(m, ann);
        std::vector<std::string> row{s.named.name,          std::to_string(s.spec.m()),  std::to_string(s.spec.p()),
                                     std::to_string(s.window.t1), std::to_string(s.window.t2),
                                     std::to_string(r.n_paths), std::to_string(r.failed_paths)};
        auto add = [&](double analytic, const Estimate& e, double scale) {
            row.push_back(format_double(analytic));
            row.push_back(format_double(e.value * scale));
            row.push_back(format_double(e.se * scale));
        };
        add(m.is_mean, r.is.mean, 1.0);
        add(m.oos_mean, r.oos.mean, 1.0);
        add(m.is_var, r.is.variance, 1.0);
        add(m.oos_var, r.oos.variance, 1.0);
        add(sr.sr_eis, r.is.sharpe, ann);
        add(sr.sr_eoos, r.oos.sharpe, ann);
        add(sr.replication_ratio, r.replication, 1.0);
        csv += io::csv_line(row);
        json j = io::to_json(r);
        j["analytic"]["sharpe"] = io::to_json(sr);
        results.push_back({{"name", s.named.name}, {"window", s.named.window}, {"result", j}});
        if (!r.paths.empty()) out.artifacts.push_back({"paths_" + s.named.name + ".csv", paths_csv(r)});
    }
    out.artifacts.insert(out.artifacts.begin(), {{"simulate.csv", csv}, {"simulate.json", results.dump(2) + "\n"}});
    out.summary = csv;
    return out;
}

CommandOutput cmd_mc_check(const json& cfg) {
    CommandOutput out;
    const double z_limit = get_or(cfg, "z_limit", 3.0);
    const double is_var_rel_tol = get_or(cfg, "is_var_rel_tol", 0.03);
    const auto sims = run_simulations(cfg);
    std::string csv = io::csv_line({"name", "quantity", "analytic", "simulated", "se", "z", "allowance", "pass"});
    json report = json::array();
    bool all_pass = true;
    for (const auto& s : sims) {
        const ExperimentResult& r = s.result;
        const MomentSummary& m = r.analytic.moments;
        json rows = json::array();
        double worst = 0.0;
        bool spec_pass = true;
        auto check = [&](const std::string& q, double analytic, const Estimate& e, double rel_tol) {
            const double diff = e.value - analytic;
            const double z = e.se > 0.0 ? diff / e.se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
            const double allowance = z_limit * e.se + rel_tol * std::abs(analytic);
            const bool pass = std::abs(diff) <= allowance;
            spec_pass = spec_pass && pass;
            worst = std::max(worst, std::abs(z));
            csv += io::csv_line({s.named.name, q, format_double(analytic), format_double(e.value), format_double(e.se),
                                 format_double(z), format_double(allowance), pass ? "1" : "0"});
            rows.push_back({{"quantity", q}, {"analytic", analytic}, {"simulated", e.value}, {"se", e.se},
                            {"z", std::isfinite(z) ? json(z) : json(nullptr)}, {"pass", pass}});
        };
        check("is_mean", m.is_mean, r.is.mean, 0.0);
        check("oos_mean", m.oos_mean, r.oos.mean, 0.0);
        check("is_var", m.is_var, r.is.variance, is_var_rel_tol);
        check("oos_var", m.oos_var, r.oos.variance, 0.0);
        check("mean_gap", m.is_mean - m.oos_mean, r.mean_gap, 0.0);
        all_pass = all_pass && spec_pass;
        out.summary += s.named.name + ": " + (spec_pass ? "PASS" : "FAIL") + " max|z|=" + format_double(worst) + "\n";
        report.push_back({{"name", s.named.name}, {"pass", spec_pass}, {"max_abs_z", worst}, {"checks", rows}});
    }
    out.artifacts.push_back({"mc_check.csv", csv});
    out.artifacts.push_back({"mc_check.json", json{{"pass", all_pass}, {"specs", report}}.dump(2) + "\n"});
    out.status = all_pass ? 0 : 3;
    return out;
}

CommandOutput cmd_calibrate(const json& cfg) {
    const double ann = multiplier(cfg);
    const double tol = get_or(cfg, "tol", 1e-8);
    CommandOutput out;
    json targets = json::array();
    if (cfg.contains("targets")) {
        targets = cfg.at("targets");
    } else {
        targets.push_back(need(cfg, "target", "calibrate"));
    }
    std::string csv = io::csv_line({"name", "p", "t1", "observed_oos_sr", "k", "sr_eoos", "supremum", "status",
                                    "sr_eoos_annualized"});
    json results = json::array();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const json& tj = targets[i];
        const std::string name = get_or<std::string>(tj, "name", "target" + std::to_string(i));
        at_point("target '" + name + "'", [&] {
            const CalibrationTarget t = io::calibration_target_from_json(tj);
            const CalibrationResult c = implied_beta(t, tol);
            csv += io::csv_line({name, std::to_string(t.p_active), std::to_string(t.t1),
                                 format_double(t.observed_oos_sr), format_double(c.k), format_double(c.sr_eoos),
                                 format_double(c.supremum), to_string(c.status), format_double(c.sr_eoos * ann)});
            results.push_back({{"name", name},
                               {"k", c.k},
                               {"beta_star", io::to_json(c.beta_star)},
                               {"sr_eoos", c.sr_eoos},
                               {"supremum", c.supremum},
                               {"iterations", c.iterations},
                               {"status", to_string(c.status)}});
            return 0;
        });
    }
    out.artifacts.push_back({"calibrate.csv", csv});
    out.artifacts.push_back({"calibrate.json", results.dump(2) + "\n"});
    out.summary = csv;
    return out;
}

CommandOutput cmd_resample(const json& cfg) {
    CommandOutput out;
    const std::string path = need(cfg, "data", "resample").get<std::string>();
    if (!std::filesystem::exists(path)) throw ValidationError("data file not found: " + path);
    out.inputs.push_back({path, io::sha256_file(path)});
    std::optional<std::string> ret;
    if (cfg.contains("return_column")) ret = cfg.at("return_column").get<std::string>();
    ResampleDataset data = load_resample_dataset(path, ret);
    if (get_or(cfg, "normalize", false)) data = trailing_normalize(data);
    const ResampleConfig rc = io::resample_config_from_json(cfg.at("resample"));
    const auto records = resample_study(data, rc);

    std::string ndjson;
    for (const auto& r : records) ndjson += io::to_json(r).dump() + "\n";
    out.artifacts.push_back({"records.ndjson", ndjson});

    const json bins = cfg.value("bins", json::object());
    const int n_bins = get_or(bins, "n_bins", 20);
    std::vector<std::string> keys{"p", "t1", "implied_sr"};
    if (bins.contains("keys")) keys = bins.at("keys").get<std::vector<std::string>>();
    for (const auto& key : keys) {
        const auto b = bin_records(records, bin_key_from_string(key), n_bins);
        out.artifacts.push_back(
            {"bins_" + key + ".csv", io::emit_plot_data(io::resample_bins_table(b), io::PlotKind::ResampleBins)});
    }
    const auto overall = bin_records(records, BinKey::P, 1);
    if (!overall.empty()) {
        const ReplicationBin& o = overall.front();
        json summary{{"draws", records.size()},
                     {"count", o.count},
                     {"analytic_count", o.analytic_count},
                     {"ratio_of_expectations", io::to_json(o.ratio_of_expectations)},
                     {"expectation_of_ratio", io::to_json(o.expectation_of_ratio)},
                     {"analytic_ratio_of_expectations", io::to_json(o.analytic_ratio_of_expectations)},
                     {"analytic_expectation_of_ratio", io::to_json(o.analytic_expectation_of_ratio)}};
        out.artifacts.push_back({"summary.json", summary.dump(2) + "\n"});
        out.summary = summary.dump(2) + "\n";
    }
    return out;
}

CommandOutput cmd_epsilon(const json& cfg) {
    CommandOutput out;
    std::string csv = io::csv_line({"name", "t1", "t2", "epsilon", "se", "percent", "simulated_is_var", "analytic_is_var"});
    const auto specs = spec_list(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const NamedSpec& s = specs[i];
        at_point(point_label(s), [&] {
            const ModelSpec spec = io::model_from_json(s.model);
            const BacktestWindow w = io::window_from_json(s.window);
            const EpsilonEstimate e =
                estimate_epsilon(spec, w, cfg.at("paths").get<int>(), seed + i, cfg.at("threads").get<int>());
            csv += io::csv_line({s.name, std::to_string(w.t1), std::to_string(w.t2), format_double(e.epsilon),
                                 format_double(e.se), format_double(e.percent), format_double(e.simulated_is_var),
                                 format_double(e.analytic_is_var)});
            return 0;
        });
    }
    out.artifacts.push_back({"epsilon.csv", csv});
    out.summary = csv;
    return out;
}

CommandOutput cmd_kan_compare(const json& cfg) {
    const double ann = multiplier(cfg);
    CommandOutput out;
    const double theta = need(cfg, "theta", "kan-compare").get<double>();
    const int t = need(cfg, "t", "kan-compare").get<int>();
    const auto ms = int_list(need(cfg, "m", "kan-compare"), "kan-compare.m");
    const int p_ours = get_or(cfg, "p_ours", 1);
    auto rows = at_point("kan-compare (theta=" + format_double(theta) + ", t=" + std::to_string(t) + ")",
                         [&] { return kan_comparison_curve(theta, t, ms, p_ours); });
    for (auto& r : rows) {
        r.kan_is *= ann;
        r.kan_oos *= ann;
        r.ours_sr_eis *= ann;
        r.ours_sr_eoos *= ann;
    }
    const std::string csv = io::emit_plot_data(io::kan_comparison_table(rows), io::PlotKind::KanComparison);
    out.artifacts.push_back({"kan_comparison.csv", csv});
    out.summary = csv;
    return out;
}

const std::map<std::string, std::pair<std::string, std::function<CommandOutput(const json&)>>>& commands() {
    static const std::map<std::string, std::pair<std::string, std::function<CommandOutput(const json&)>>> table{
        {"analytic", {"Closed-form expected Sharpe ratios and plot grids", cmd_analytic}},
        {"simulate", {"Monte Carlo backtests with analytic comparison", cmd_simulate}},
        {"mc-check", {"Analytic moments against Monte Carlo with z-scores", cmd_mc_check}},
        {"calibrate", {"Implied signal strength for observed OOS Sharpe ratios", cmd_calibrate}},
        {"resample", {"Resampling study over a signal/return dataset", cmd_resample}},
        {"epsilon", {"Simulated size of the dropped in-sample variance terms", cmd_epsilon}},
        {"kan-compare", {"Uniform-beta replication against the plug-in Markowitz benchmark", cmd_kan_compare}},
    };
    return table;
}

int execute(const std::string& command, const Flags& flags, std::ostream& out) {
    const json resolved = resolve(command, load_config(flags.config, command), flags);
    const CommandOutput result = commands().at(command).second(resolved);
    if (!flags.out.empty()) {
        io::RunDirectory dir(flags.out);
        for (const auto& a : result.artifacts) dir.write(a.name, a.content);
        const json manifest = io::make_manifest(command, resolved, result.inputs, dir.outputs());
        dir.write("manifest.json", manifest.dump(2) + "\n");
    }
    out << result.summary;
    return result.status;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"overfit-lab: expected in-sample and out-of-sample Sharpe ratios of linear strategies",
                 "overfit-lab"};
    app.require_subcommand(1);
    Flags flags;
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, std::array<CLI::Option*, 4>> opts;
    for (const auto& [name, entry] : commands()) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", flags.config, "JSON config or a manifest.json to replay")->required();
        sub->add_option("--out", flags.out, "Run directory to create (must be new or empty)");
        opts[name] = {sub->add_option("--seed", flags.seed, "Master seed"),
                      sub->add_option("--paths", flags.paths, "Monte Carlo paths (resample: draws)"),
                      sub->add_option("--threads", flags.threads, "Worker threads, 0 for all cores"),
                      sub->add_option("--annualize", flags.annualize, "Periods per year (252, 12 or 1)")};
        subs[name] = sub;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    }
    std::string command;
    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) command = name;
    }
    const auto& o = opts.at(command);
    flags.has_seed = o[0]->count() > 0;
    flags.has_paths = o[1]->count() > 0;
    flags.has_threads = o[2]->count() > 0;
    flags.has_annualize = o[3]->count() > 0;
    try {
        return execute(command, flags, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const json::exception& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << one_line(e.what()) << "\n";
        return 2;
    }
}

}  // namespace overfit::cli
