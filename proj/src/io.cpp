#include "overfit/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <openssl/evp.h>

#include "overfit/error.hpp"

namespace overfit::io {

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(where + ": missing required key '" + key + "'");
    }
    return j.at(key);
}

double number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ValidationError(what + ": expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ValidationError(what + ": expected an integer");
    return j.get<int>();
}

std::uint64_t seed_value(const json& j, const std::string& what) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
        throw ValidationError(what + ": expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("key '") + key + "': wrong type");
    }
}

json num(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

MatrixXd covariance_from_json(const json& j, Eigen::Index n, const std::string& what) {
    if (j.is_string()) {
        if (j.get<std::string>() != "identity") throw ValidationError(what + ": unknown keyword '" + j.get<std::string>() + "'");
        return MatrixXd::Identity(n, n);
    }
    MatrixXd a = matrix_from_json(j, what);
    if (a.rows() == 1 && a.cols() == 1 && n > 1) return a(0, 0) * MatrixXd::Identity(n, n);
    if (a.cols() == 1 && a.rows() == n && n > 1) {
        MatrixXd d = a.col(0).asDiagonal();
        return d;
    }
    return a;
}

WeightRule weight_rule_from_json(const json& j) {
    if (j.is_string()) {
        const auto kind = weight_kind_from_string(j.get<std::string>());
        if (kind == WeightRule::Kind::Custom) throw ValidationError("weight_rule: custom needs {\"custom\": matrix}");
        return {kind, {}};
    }
    return WeightRule::custom_matrix(matrix_from_json(require(j, "custom", "weight_rule"), "weight_rule.custom"));
}

json weight_rule_to_json(const WeightRule& rule) {
    if (rule.kind == WeightRule::Kind::Custom) return json{{"custom", to_json(rule.custom)}};
    return to_string(rule.kind);
}

PanelGrouping grouping_from_json(const json& j, const ModelSpec& spec) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "shared") return shared_signal_grouping(spec.m(), spec.p());
        if (name == "singleton") return singleton_grouping(spec.m(), spec.p());
        throw ValidationError("fit.grouping: unknown grouping '" + name + "'");
    }
    if (j.is_object() && j.contains("own_family")) {
        const json& o = j.at("own_family");
        const int families = integer(require(o, "n_families", "fit.grouping.own_family"), "n_families");
        return own_signal_family_grouping(spec.m(), families, value_or(o, "intercept", spec.has_intercept));
    }
    if (j.is_array()) {
        // Explicit m x p table of group ids; -1 holds the loading at zero.
        const MatrixXd g = matrix_from_json(j, "fit.grouping");
        PanelGrouping out;
        out.group_of = g.cast<int>();
        if ((out.group_of.cast<double>() - g).cwiseAbs().maxCoeff() > 0.0) {
            throw ValidationError("fit.grouping: group ids must be integers");
        }
        out.n_groups = out.group_of.size() == 0 ? 0 : out.group_of.maxCoeff() + 1;
        return out;
    }
    throw ValidationError("fit.grouping: expected \"shared\", \"singleton\", {\"own_family\": ...} or a matrix");
}

}  // namespace

MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array()) throw ValidationError(what + ": expected a number or an array");
    if (j.empty()) return MatrixXd(0, 0);
    if (!j.front().is_array()) {
        VectorXd v(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
        return v;
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.front().size());
    MatrixXd a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(what + ": ragged matrix at row " + std::to_string(r));
        }
        for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = number(row[static_cast<std::size_t>(c)], what);
    }
    return a;
}

VectorXd vector_from_json(const json& j, const std::string& what) {
    const MatrixXd a = matrix_from_json(j, what);
    if (a.cols() == 1) return a.col(0);
    if (a.rows() == 1) return a.row(0).transpose();
    throw ValidationError(what + ": expected a vector");
}

json to_json(const MatrixXd& a) {
    json out = json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(num(a(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

json to_json(const VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
    return out;
}

ModelSpec model_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("model: expected an object");
    ModelSpec spec;
    if (j.contains("uniform")) {
        const json& u = j.at("uniform");
        const double k = number(require(u, "k", "model.uniform"), "model.uniform.k");
        const int m = integer(require(u, "m", "model.uniform"), "model.uniform.m");
        const int p = integer(require(u, "p", "model.uniform"), "model.uniform.p");
        if (m < 1 || p < 1) throw ValidationError("model.uniform: m and p must be positive");
        spec = make_standard_spec(MatrixXd::Constant(m, p, k), MatrixXd::Identity(m, m), WeightRule::identity());
    } else if (j.contains("random")) {
        const json& r = j.at("random");
        const int m = integer(require(r, "m", "model.random"), "model.random.m");
        const int p = integer(require(r, "p", "model.random"), "model.random.p");
        std::optional<double> target;
        if (r.contains("target_sr") && !r.at("target_sr").is_null()) target = number(r.at("target_sr"), "model.random.target_sr");
        RandomModelOptions opts;
        opts.lkj_eta = value_or(r, "lkj_eta", opts.lkj_eta);
        opts.chi2_dof = value_or(r, "chi2_dof", opts.chi2_dof);
        const std::uint64_t seed = r.contains("seed") ? seed_value(r.at("seed"), "model.random.seed") : 0;
        spec = sample_random_model(m, p, target, seed, opts);
    } else {
        spec.beta = matrix_from_json(require(j, "beta", "model"), "model.beta");
        if (spec.beta.cols() == 1 && j.at("beta").is_array() && !j.at("beta").empty() &&
            !j.at("beta").front().is_array()) {
            // Flat beta: one asset with p signals.
            spec.beta.transposeInPlace();
        }
        const Eigen::Index m = spec.beta.rows();
        const Eigen::Index p = spec.beta.cols();
        spec.has_intercept = value_or(j, "intercept", false);
        spec.sigma_eps = j.contains("sigma_eps") ? covariance_from_json(j.at("sigma_eps"), m, "model.sigma_eps")
                                                 : MatrixXd::Identity(m, m);
        if (j.contains("sigma_s")) {
            spec.sigma_s = covariance_from_json(j.at("sigma_s"), p, "model.sigma_s");
        } else if (spec.has_intercept) {
            spec.sigma_s = MatrixXd::Identity(p, p);
            spec.sigma_s(0, 0) = 0.0;
        } else {
            spec.sigma_s = MatrixXd::Identity(p, p);
        }
        if (spec.has_intercept && spec.sigma_s.rows() == p - 1 && p > 1) {
            // Dynamic covariance given without the intercept row.
            MatrixXd full = MatrixXd::Zero(p, p);
            full.bottomRightCorner(p - 1, p - 1) = spec.sigma_s;
            spec.sigma_s = full;
        }
        if (j.contains("mu_s")) {
            spec.mu_s = vector_from_json(j.at("mu_s"), "model.mu_s");
        } else {
            spec.mu_s = VectorXd::Zero(p);
            if (spec.has_intercept) spec.mu_s(0) = 1.0;
        }
        spec.weight_rule = WeightRule::precision();
    }
    if (j.contains("weight_rule")) spec.weight_rule = weight_rule_from_json(j.at("weight_rule"));
    if (j.contains("scale")) spec = scale_beta(spec, number(j.at("scale"), "model.scale"));
    require_valid(spec);
    return spec;
}

json model_to_json(const ModelSpec& spec) {
    return json{{"beta", to_json(spec.beta)},
                {"mu_s", to_json(spec.mu_s)},
                {"sigma_s", to_json(spec.sigma_s)},
                {"sigma_eps", to_json(spec.sigma_eps)},
                {"intercept", spec.has_intercept},
                {"weight_rule", weight_rule_to_json(spec.weight_rule)}};
}

BacktestWindow window_from_json(const json& j) {
    BacktestWindow w;
    w.t1 = integer(require(j, "t1", "window"), "window.t1");
    w.t2 = integer(require(j, "t2", "window"), "window.t2");
    if (w.t1 < 1 || w.t2 < 1) throw ValidationError("window: t1 and t2 must be positive");
    return w;
}

SimulationConfig simulation_config_from_json(const json& j, const ModelSpec& spec) {
    SimulationConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ValidationError("simulation: expected an object");
    if (j.contains("signal_kind")) c.signal_kind = signal_kind_from_string(j.at("signal_kind").get<std::string>());
    if (j.contains("noise_kind")) c.noise_kind = noise_kind_from_string(j.at("noise_kind").get<std::string>());
    const Eigen::Index dyn = spec.p() - (spec.has_intercept ? 1 : 0);
    if (j.contains("phi")) {
        MatrixXd phi = matrix_from_json(j.at("phi"), "simulation.phi");
        if (phi.size() == 1 && dyn > 1) phi = phi(0, 0) * MatrixXd::Identity(dyn, dyn);
        c.phi = phi;
    }
    if (j.contains("shock_cov") && !j.at("shock_cov").is_null()) {
        c.shock_cov = covariance_from_json(j.at("shock_cov"), dyn, "simulation.shock_cov");
    }
    if (j.contains("signal_dof")) c.signal_dof = vector_from_json(j.at("signal_dof"), "simulation.signal_dof");
    if (j.contains("noise_dof")) c.noise_dof = vector_from_json(j.at("noise_dof"), "simulation.noise_dof");
    c.n_paths = value_or(j, "n_paths", c.n_paths);
    if (j.contains("seed")) c.seed = seed_value(j.at("seed"), "simulation.seed");
    c.burn_in = value_or(j, "burn_in", c.burn_in);
    c.threads = value_or(j, "threads", c.threads);
    return c;
}

json to_json(const SimulationConfig& c) {
    json j{{"signal_kind", to_string(c.signal_kind)},
           {"noise_kind", to_string(c.noise_kind)},
           {"n_paths", c.n_paths},
           {"seed", c.seed},
           {"burn_in", c.burn_in},
           {"threads", c.threads}};
    if (c.phi.size() > 0) j["phi"] = to_json(c.phi);
    if (c.shock_cov) j["shock_cov"] = to_json(*c.shock_cov);
    if (c.signal_dof.size() > 0) j["signal_dof"] = to_json(c.signal_dof);
    if (c.noise_dof.size() > 0) j["noise_dof"] = to_json(c.noise_dof);
    return j;
}

ExperimentOptions experiment_options_from_json(const json& j, const ModelSpec& spec) {
    ExperimentOptions o;
    if (j.is_null()) return o;
    if (j.contains("fit")) {
        const json& f = j.at("fit");
        const std::string method = f.is_string() ? f.get<std::string>() : value_or<std::string>(f, "method", "ols");
        if (method == "ols") {
            o.fit = FitMethod::ols();
        } else if (method == "ridge") {
            o.fit = FitMethod::ridge(number(require(f, "gamma", "fit"), "fit.gamma"));
        } else if (method == "panel") {
            o.fit = FitMethod::panel(grouping_from_json(require(f, "grouping", "fit"), spec));
        } else {
            throw ValidationError("fit.method: unknown method '" + method + "'");
        }
    }
    if (j.contains("cov")) {
        const std::string cov = j.at("cov").get<std::string>();
        if (cov == "true") {
            o.cov = CovMode::TrueCov;
        } else if (cov == "estimated") {
            o.cov = CovMode::EstimatedCov;
        } else {
            throw ValidationError("cov: expected \"true\" or \"estimated\", got '" + cov + "'");
        }
    }
    o.keep_paths = value_or(j, "keep_paths", o.keep_paths);
    return o;
}

ResampleConfig resample_config_from_json(const json& j) {
    ResampleConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ValidationError("resample: expected an object");
    c.n_draws = value_or(j, "n_draws", c.n_draws);
    c.steps_per_year = value_or(j, "steps_per_year", c.steps_per_year);
    c.min_leg_years = value_or(j, "min_leg_years", c.min_leg_years);
    c.min_total_years = value_or(j, "min_total_years", c.min_total_years);
    c.max_total_years = value_or(j, "max_total_years", c.max_total_years);
    c.min_signals = value_or(j, "min_signals", c.min_signals);
    c.max_signals = value_or(j, "max_signals", c.max_signals);
    if (j.contains("seed")) c.seed = seed_value(j.at("seed"), "resample.seed");
    if (j.contains("whitening")) c.whitening = whitening_window_from_string(j.at("whitening").get<std::string>());
    c.max_attempts_per_draw = value_or(j, "max_attempts_per_draw", c.max_attempts_per_draw);
    c.calibration_tol = value_or(j, "calibration_tol", c.calibration_tol);
    c.threads = value_or(j, "threads", c.threads);
    return c;
}

json to_json(const ResampleConfig& c) {
    return json{{"n_draws", c.n_draws},
                {"steps_per_year", c.steps_per_year},
                {"min_leg_years", c.min_leg_years},
                {"min_total_years", c.min_total_years},
                {"max_total_years", c.max_total_years},
                {"min_signals", c.min_signals},
                {"max_signals", c.max_signals},
                {"seed", c.seed},
                {"whitening", to_string(c.whitening)},
                {"max_attempts_per_draw", c.max_attempts_per_draw},
                {"calibration_tol", c.calibration_tol},
                {"threads", c.threads}};
}

CalibrationTarget calibration_target_from_json(const json& j) {
    CalibrationTarget t;
    t.observed_oos_sr = number(require(j, "observed_oos_sr", "calibration"), "calibration.observed_oos_sr");
    t.p_active = integer(require(j, "p", "calibration"), "calibration.p");
    t.t1 = integer(require(j, "t1", "calibration"), "calibration.t1");
    t.include_intercept = value_or(j, "intercept", true);
    t.sigma_eps_hat = j.contains("sigma_eps_hat") ? matrix_from_json(j.at("sigma_eps_hat"), "calibration.sigma_eps_hat")
                                                  : MatrixXd::Identity(1, 1);
    return t;
}

json to_json(const MomentSummary& m) {
    json j{{"is_mean", num(m.is_mean)},
           {"oos_mean", num(m.oos_mean)},
           {"is_var", num(m.is_var)},
           {"oos_var", num(m.oos_var)},
           {"epsilon_policy", m.epsilon_policy == EpsilonPolicy::DroppedZero ? "dropped_zero" : "simulated_estimate"},
           {"epsilon", num(m.epsilon)}};
    if (m.constants) {
        j["constants"] = {{"c1", num(m.constants->c1)},
                          {"c1_tilde", num(m.constants->c1_tilde)},
                          {"c2", num(m.constants->c2)},
                          {"c2_tilde", num(m.constants->c2_tilde)}};
    }
    return j;
}

json to_json(const SharpeReport& s) {
    return json{{"sr_true", num(s.sr_true)},
                {"sr_eis", num(s.sr_eis)},
                {"sr_eoos", num(s.sr_eoos)},
                {"replication_ratio", num(s.replication_ratio)},
                {"replication_defined", s.replication_defined},
                {"informationless", s.informationless},
                {"annualization_factor", num(s.annualization_factor)}};
}

json to_json(const AnalyticResult& a) { return json{{"moments", to_json(a.moments)}, {"sharpe", to_json(a.sharpe)}}; }

json to_json(const Estimate& e) { return json{{"value", num(e.value)}, {"se", num(e.se)}}; }

json to_json(const PeriodSummary& s) {
    return json{{"mean", to_json(s.mean)},
                {"variance", to_json(s.variance)},
                {"sharpe", to_json(s.sharpe)},
                {"ratio_sharpe", to_json(s.ratio_sharpe)},
                {"convexity_gap", to_json(s.convexity_gap)},
                {"sharpe_q05", num(s.sharpe_q05)},
                {"sharpe_q50", num(s.sharpe_q50)},
                {"sharpe_q95", num(s.sharpe_q95)},
                {"degenerate_paths", s.degenerate_paths}};
}

json to_json(const ExperimentResult& r) {
    json j{{"analytic", to_json(r.analytic)},
           {"is", to_json(r.is)},
           {"oos", to_json(r.oos)},
           {"mean_gap", to_json(r.mean_gap)},
           {"replication", to_json(r.replication)},
           {"expected_replication", to_json(r.expected_replication)},
           {"mean_path_ratio", to_json(r.mean_path_ratio)},
           {"n_paths", r.n_paths},
           {"failed_paths", r.failed_paths},
           {"se_defined", r.se_defined}};
    return j;
}

json to_json(const ResampleRecord& r) {
    return json{{"draw", r.draw},
                {"attempts", r.attempts},
                {"signals", r.signals},
                {"p", r.p()},
                {"start", r.start},
                {"t1", r.t1},
                {"t2", r.t2},
                {"sr_is", num(r.is.sharpe)},
                {"sr_oos", num(r.oos.sharpe)},
                {"sigma_eps_hat", num(r.sigma_eps_hat)},
                {"fit_failed", r.fit_failed},
                {"status", to_string(r.status)},
                {"k", num(r.k)},
                {"supremum", num(r.supremum)},
                {"analytic_defined", r.analytic_defined},
                {"sr_true", r.analytic_defined ? num(r.sr_true) : json(nullptr)},
                {"sr_eis", r.analytic_defined ? num(r.sr_eis) : json(nullptr)},
                {"sr_eoos", r.analytic_defined ? num(r.sr_eoos) : json(nullptr)},
                {"replication", r.analytic_defined ? num(r.replication) : json(nullptr)}};
}

std::string format_double(double x) {
    if (!std::isfinite(x)) return "";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out += ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            out += f;
        } else {
            out += '"';
            for (char c : f) {
                if (c == '"') out += '"';
                out += c;
            }
            out += '"';
        }
    }
    out += '\n';
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open input file: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericalError("sha256: digest initialisation failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        const auto got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md.data(), &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

void LongTable::add(std::vector<double> ids, std::string quantity, double value, double se) {
    if (ids.size() != id_columns.size()) {
        throw ValidationError("LongTable: row has " + std::to_string(ids.size()) + " ids, table has " +
                              std::to_string(id_columns.size()) + " id columns");
    }
    rows.push_back({std::move(ids), std::move(quantity), value, se});
}

std::string to_string(PlotKind kind) {
    switch (kind) {
        case PlotKind::ReplicationVsT1: return "replication_vs_t1";
        case PlotKind::ReplicationVsP: return "replication_vs_p";
        case PlotKind::HeatmapSrT1: return "heatmap_sr_t1";
        case PlotKind::KanComparison: return "kan_comparison";
        case PlotKind::ResampleBins: return "resample_bins";
    }
    return "unknown";
}

PlotKind plot_kind_from_string(const std::string& name) {
    for (PlotKind k : {PlotKind::ReplicationVsT1, PlotKind::ReplicationVsP, PlotKind::HeatmapSrT1,
                       PlotKind::KanComparison, PlotKind::ResampleBins}) {
        if (to_string(k) == name) return k;
    }
    throw ValidationError("unknown plot kind '" + name + "'");
}

std::vector<std::string> plot_id_columns(PlotKind kind) {
    switch (kind) {
        case PlotKind::ReplicationVsT1: return {"t1"};
        case PlotKind::ReplicationVsP: return {"p"};
        case PlotKind::HeatmapSrT1: return {"sr_true", "t1"};
        case PlotKind::KanComparison: return {"m"};
        case PlotKind::ResampleBins: return {"bin", "key_min", "key_max", "key_mean", "count"};
    }
    return {};
}

LongTable replication_vs_t1(const ModelSpec& spec, const std::vector<int>& t1_grid, double annualization) {
    LongTable t;
    t.id_columns = plot_id_columns(PlotKind::ReplicationVsT1);
    for (int t1 : t1_grid) {
        const BacktestWindow w{t1, 1};
        check_window(w, spec.p());
        AnalyticResult a;
        try {
            a = analyze(spec, w, annualization);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at t1=" + std::to_string(t1));
        }
        const std::vector<double> id{static_cast<double>(t1)};
        t.add(id, "sr_true", a.sharpe.sr_true);
        t.add(id, "sr_eis", a.sharpe.sr_eis);
        t.add(id, "sr_eoos", a.sharpe.sr_eoos);
        t.add(id, "replication", a.sharpe.replication_ratio);
    }
    return t;
}

LongTable replication_vs_p(double sr_true, int m, int t1, const std::vector<int>& p_grid, double annualization) {
    LongTable t;
    t.id_columns = plot_id_columns(PlotKind::ReplicationVsP);
    for (int p : p_grid) {
        if (t1 <= p + 1) throw ValidationError("replication_vs_p: t1 must exceed p + 1 (p=" + std::to_string(p) + ")");
        const double k = uniform_beta_k_for_true_sharpe(sr_true, p, m);
        const UniformBetaSharpes s = uniform_beta_sharpes(k, p, m, t1);
        const std::vector<double> id{static_cast<double>(p)};
        t.add(id, "k", k);
        t.add(id, "sr_eis", s.sr_eis * annualization);
        t.add(id, "sr_eoos", s.sr_eoos * annualization);
        t.add(id, "replication", uniform_beta_replication(k, p, m, t1));
    }
    return t;
}

LongTable heatmap_sr_t1(const std::vector<double>& sr_grid, const std::vector<int>& t1_grid, int p, int m,
                        double annualization) {
    LongTable t;
    t.id_columns = plot_id_columns(PlotKind::HeatmapSrT1);
    for (double sr : sr_grid) {
        const double k = uniform_beta_k_for_true_sharpe(sr, p, m);
        for (int t1 : t1_grid) {
            if (t1 <= p + 1) throw ValidationError("heatmap_sr_t1: t1 must exceed p + 1 (t1=" + std::to_string(t1) + ")");
            t.add({sr * annualization, static_cast<double>(t1)}, "replication", uniform_beta_replication(k, p, m, t1));
        }
    }
    return t;
}

LongTable kan_comparison_table(const std::vector<KanComparisonRow>& rows) {
    LongTable t;
    t.id_columns = plot_id_columns(PlotKind::KanComparison);
    for (const auto& r : rows) {
        const std::vector<double> id{static_cast<double>(r.m)};
        t.add(id, "kan_is", r.kan_is);
        t.add(id, "kan_oos", r.kan_oos);
        t.add(id, "kan_ratio", r.kan_ratio);
        t.add(id, "ours_k", r.ours_k);
        t.add(id, "ours_sr_eis", r.ours_sr_eis);
        t.add(id, "ours_sr_eoos", r.ours_sr_eoos);
        t.add(id, "ours_ratio", r.ours_ratio);
    }
    return t;
}

LongTable resample_bins_table(const std::vector<ReplicationBin>& bins) {
    LongTable t;
    t.id_columns = plot_id_columns(PlotKind::ResampleBins);
    for (const auto& b : bins) {
        const std::vector<double> id{static_cast<double>(b.bin), b.key_min, b.key_max, b.key_mean,
                                     static_cast<double>(b.count)};
        t.add(id, "ratio_of_expectations", b.ratio_of_expectations.value, b.ratio_of_expectations.se);
        t.add(id, "expectation_of_ratio", b.expectation_of_ratio.value, b.expectation_of_ratio.se);
        t.add(id, "analytic_ratio_of_expectations", b.analytic_ratio_of_expectations.value,
              b.analytic_ratio_of_expectations.se);
        t.add(id, "analytic_expectation_of_ratio", b.analytic_expectation_of_ratio.value,
              b.analytic_expectation_of_ratio.se);
    }
    return t;
}

std::string emit_plot_data(const LongTable& table, PlotKind kind) {
    const auto expected = plot_id_columns(kind);
    if (table.id_columns != expected) {
        std::string want;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        throw ValidationError(to_string(kind) + ": identifier columns must be " + want);
    }
    std::vector<std::string> header = table.id_columns;
    header.insert(header.end(), {"quantity", "value", "se"});
    std::string out = csv_line(header);
    for (const auto& row : table.rows) {
        std::vector<std::string> fields;
        for (double id : row.ids) fields.push_back(format_double(id));
        fields.push_back(row.quantity);
        fields.push_back(format_double(row.value));
        fields.push_back(format_double(row.se));
        out += csv_line(fields);
    }
    return out;
}

RunDirectory::RunDirectory(std::filesystem::path root) : root_(std::move(root)) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(root_, ec)) {
        if (!fs::is_directory(root_, ec)) throw ValidationError("output path is not a directory: " + root_.string());
        if (!fs::is_empty(root_, ec)) {
            throw ValidationError("output directory is not empty, refusing to overwrite: " + root_.string());
        }
    } else if (!fs::create_directories(root_, ec) || ec) {
        throw ValidationError("cannot create output directory: " + root_.string());
    }
}

void RunDirectory::write(const std::string& name, const std::string& content) {
    const auto path = root_ / name;
    if (std::filesystem::exists(path)) throw ValidationError("refusing to overwrite " + path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
    if (!out) throw ValidationError("write failed: " + path.string());
    outputs_.push_back(name);
}

json make_manifest(const std::string& command, const json& resolved_config, const std::vector<InputFile>& inputs,
                   const std::vector<std::string>& outputs) {
    json in = json::array();
    for (const auto& f : inputs) in.push_back({{"path", f.path}, {"sha256", f.sha256}});
    json seed = nullptr;
    if (resolved_config.is_object() && resolved_config.contains("seed")) seed = resolved_config.at("seed");
    return json{{"command", command},
                {"version", OVERFIT_VERSION},
                {"resolved_config", resolved_config},
                {"seed", seed},
                {"inputs", in},
                {"outputs", outputs}};
}

}  // namespace overfit::io
