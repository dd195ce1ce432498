#include "overfit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/roots.hpp>

#include "overfit/csv.hpp"
#include "overfit/estimation.hpp"
#include "overfit/rng.hpp"

namespace overfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSupremumK = 1e6;

void check_target(const CalibrationTarget& target) {
    if (target.p_active < 1) throw ValidationError("p_active must be >= 1");
    const int p_total = target.p_active + (target.include_intercept ? 1 : 0);
    check_window({target.t1, 1}, p_total);
    if (target.sigma_eps_hat.rows() < 1 || target.sigma_eps_hat.rows() != target.sigma_eps_hat.cols()) {
        throw ValidationError("sigma_eps_hat must be a non-empty square matrix");
    }
    if (!is_positive_definite(target.sigma_eps_hat)) {
        throw ValidationError("sigma_eps_hat is not positive definite");
    }
    if (!std::isfinite(target.observed_oos_sr)) throw ValidationError("observed OOS Sharpe is not finite");
}

Estimate mean_estimate(const std::vector<double>& xs) {
    if (xs.empty()) return {kNaN, kNaN};
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() < 2) return {mean, kNaN};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// E[x] / E[y] with the delta-method standard error.
Estimate ratio_estimate(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty()) return {kNaN, kNaN};
    const double ex = mean_estimate(x).value;
    const double ey = mean_estimate(y).value;
    if (ey == 0.0) return {kNaN, kNaN};
    const double ratio = ex / ey;
    std::vector<double> infl(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) infl[i] = (x[i] - ratio * y[i]) / ey;
    return {ratio, mean_estimate(infl).se};
}

std::pair<int, int> finite_span(const Eigen::Ref<const VectorXd>& x) {
    int first = -1;
    int last = -2;
    for (Eigen::Index t = 0; t < x.size(); ++t) {
        if (std::isfinite(x(t))) {
            if (first < 0) first = static_cast<int>(t);
            last = static_cast<int>(t);
        }
    }
    return {first < 0 ? 0 : first, first < 0 ? -1 : last};
}

bool empirical_defined(const ResampleRecord& r) {
    return !r.fit_failed && r.is.sharpe_defined && r.oos.sharpe_defined;
}

}  // namespace

std::string to_string(CalibrationStatus status) {
    switch (status) {
        case CalibrationStatus::Solved: return "solved";
        case CalibrationStatus::NonPositiveTarget: return "non_positive_target";
        case CalibrationStatus::AboveSupremum: return "above_supremum";
    }
    return "solved";
}

ModelSpec implied_spec(const CalibrationTarget& target, double k) {
    const Eigen::Index m = target.sigma_eps_hat.rows();
    const int p = target.p_active;
    const int p_total = p + (target.include_intercept ? 1 : 0);
    MatrixXd beta = MatrixXd::Zero(m, p_total);
    beta.rightCols(p).setConstant(k);
    if (target.include_intercept) {
        return make_intercept_spec(beta, target.sigma_eps_hat, MatrixXd::Identity(p, p));
    }
    return make_standard_spec(beta, target.sigma_eps_hat);
}

double implied_sr_eoos(const CalibrationTarget& target, double k) {
    const ModelSpec spec = implied_spec(target, k);
    return expected_sharpes(expected_moments_general(spec, {target.t1, 1})).sr_eoos;
}

double implied_supremum(const CalibrationTarget& target) {
    check_target(target);
    return implied_sr_eoos(target, kSupremumK);
}

CalibrationResult implied_beta(const CalibrationTarget& target, double tol) {
    check_target(target);
    if (!(tol > 0.0)) throw ValidationError("calibration tolerance must be positive");
    CalibrationResult out;
    out.supremum = implied_sr_eoos(target, kSupremumK);
    if (target.observed_oos_sr <= 0.0) {
        out.status = CalibrationStatus::NonPositiveTarget;
        out.beta_star = implied_spec(target, 0.0).beta;
        return out;
    }
    if (target.observed_oos_sr >= out.supremum) {
        throw UnreachableTargetError("observed OOS Sharpe " + std::to_string(target.observed_oos_sr) +
                                         " is above the attainable supremum " + std::to_string(out.supremum),
                                     out.supremum);
    }
    auto f = [&](double k) { return implied_sr_eoos(target, k) - target.observed_oos_sr; };

    double hi = 1e3;
    while (f(hi) < 0.0 && hi < kSupremumK) hi = std::min(hi * 10.0, kSupremumK);

    // Monotonicity over the bracket, checked on a geometric grid.
    double prev = f(0.0);
    for (int i = 0; i <= 40; ++i) {
        const double k = hi * std::pow(10.0, -12.0 + 12.0 * i / 40.0);
        const double v = f(k);
        if (v < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
            throw NumericalError("SR_EOOS is not increasing in k near k=" + std::to_string(k));
        }
        prev = v;
    }

    boost::math::tools::eps_tolerance<double> bits(52);
    std::uintmax_t iters = 300;
    const auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, bits, iters);
    out.iterations = static_cast<int>(iters);
    out.k = std::abs(f(a)) <= std::abs(f(b)) ? a : b;
    out.sr_eoos = implied_sr_eoos(target, out.k);
    const double miss = std::abs(out.sr_eoos - target.observed_oos_sr);
    if (miss > tol) {
        throw ConvergenceError("implied beta root finding missed the target by " + std::to_string(miss),
                               out.k, out.iterations);
    }
    out.beta_star = implied_spec(target, out.k).beta;
    return out;
}

ModelSpec scale_beta(ModelSpec spec, double c) {
    spec.beta *= c;
    return spec;
}

double scale_for_sr_eis(const ModelSpec& spec, const BacktestWindow& window, double target) {
    require_valid(spec);
    auto sr_eis = [&](double c) {
        return expected_sharpes(expected_moments_general(scale_beta(spec, c), window)).sr_eis;
    };
    const double floor = sr_eis(0.0);
    const double ceiling = sr_eis(1e6);
    if (!(target > floor && target < ceiling)) {
        throw ValidationError("target SR_EIS " + std::to_string(target) + " outside the attainable range (" +
                              std::to_string(floor) + ", " + std::to_string(ceiling) + ")");
    }
    double hi = 1.0;
    while (sr_eis(hi) < target) hi *= 2.0;
    boost::math::tools::eps_tolerance<double> bits(52);
    std::uintmax_t iters = 300;
    const auto [a, b] =
        boost::math::tools::toms748_solve([&](double c) { return sr_eis(c) - target; }, 0.0, hi, bits, iters);
    return 0.5 * (a + b);
}

ResampleDataset make_resample_dataset(VectorXd returns, MatrixXd signals, std::vector<std::string> signal_names,
                                      std::vector<std::string> dates) {
    if (signals.cols() != returns.size()) {
        throw ValidationError("signals have " + std::to_string(signals.cols()) + " steps, returns " +
                              std::to_string(returns.size()));
    }
    if (!dates.empty() && static_cast<Eigen::Index>(dates.size()) != returns.size()) {
        throw ValidationError("date count does not match the number of steps");
    }
    ResampleDataset d;
    d.returns = std::move(returns);
    d.signals = std::move(signals);
    d.dates = std::move(dates);
    if (signal_names.empty()) {
        for (Eigen::Index j = 0; j < d.signals.rows(); ++j) signal_names.push_back("s" + std::to_string(j));
    }
    if (static_cast<Eigen::Index>(signal_names.size()) != d.signals.rows()) {
        throw ValidationError("signal name count does not match the signal rows");
    }
    d.signal_names = std::move(signal_names);
    if (d.return_name.empty()) d.return_name = "return";
    d.coverage.reserve(d.signals.rows());
    for (Eigen::Index j = 0; j < d.signals.rows(); ++j) d.coverage.push_back(finite_span(d.signals.row(j).transpose()));
    d.return_coverage = finite_span(d.returns);
    return d;
}

ResampleDataset load_resample_dataset(const std::string& path, const std::optional<std::string>& return_column) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 3) {
        throw ValidationError(path + ": need a date column, a return column and at least one signal");
    }
    const std::size_t ret = return_column ? table.column(*return_column) : 1;
    if (ret == 0) throw ValidationError(path + ": the return column cannot be the date column");
    const Eigen::Index t = static_cast<Eigen::Index>(table.rows.size());
    const Eigen::Index n = static_cast<Eigen::Index>(table.header.size()) - 2;
    VectorXd returns(t);
    MatrixXd signals(n, t);
    std::vector<std::string> names, dates;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        if (c != ret) names.push_back(table.header[c]);
    }
    for (Eigen::Index k = 0; k < t; ++k) {
        const auto& row = table.rows[k];
        dates.push_back(row[0]);
        Eigen::Index j = 0;
        for (std::size_t c = 1; c < row.size(); ++c) {
            const std::string where = path + " row " + std::to_string(k + 2) + " column " + table.header[c];
            const double v = parse_cell(row[c], where).value_or(kNaN);
            if (c == ret) {
                returns(k) = v;
            } else {
                signals(j++, k) = v;
            }
        }
    }
    ResampleDataset d = make_resample_dataset(std::move(returns), std::move(signals), std::move(names),
                                              std::move(dates));
    d.return_name = table.header[ret];
    return d;
}

ResampleDataset trailing_normalize(const ResampleDataset& data, int return_window, int min_history) {
    if (return_window < 2 || min_history < 2) throw ValidationError("normalization windows must be >= 2");
    const Eigen::Index t = data.returns.size();
    VectorXd r = VectorXd::Constant(t, kNaN);
    for (Eigen::Index k = return_window; k < t; ++k) {
        const VectorXd past = data.returns.segment(k - return_window, return_window);
        if (!past.allFinite() || !std::isfinite(data.returns(k))) continue;
        const double var = (past.array() - past.mean()).square().sum() / (return_window - 1.0);
        if (var > 0.0) r(k) = data.returns(k) / std::sqrt(var);
    }
    MatrixXd s = MatrixXd::Constant(data.signals.rows(), t, kNaN);
    for (Eigen::Index j = 0; j < data.signals.rows(); ++j) {
        double sum = 0.0, sum_sq = 0.0;
        int n = 0;
        for (Eigen::Index k = 0; k < t; ++k) {
            const double x = data.signals(j, k);
            if (!std::isfinite(x)) continue;
            sum += x;
            sum_sq += x * x;
            ++n;
            if (n < min_history) continue;
            const double var = (sum_sq - sum * sum / n) / (n - 1.0);
            if (var > 0.0) s(j, k) = x / std::sqrt(var);
        }
    }
    ResampleDataset out = make_resample_dataset(std::move(r), std::move(s), data.signal_names, data.dates);
    out.return_name = data.return_name;
    return out;
}

std::string to_string(WhiteningWindow w) {
    return w == WhiteningWindow::FullWindow ? "full_window" : "in_sample_only";
}

WhiteningWindow whitening_window_from_string(const std::string& name) {
    if (name == "full_window") return WhiteningWindow::FullWindow;
    if (name == "in_sample_only") return WhiteningWindow::InSampleOnly;
    throw ValidationError("unknown whitening window '" + name + "'");
}

namespace {

struct StepLimits {
    int min_leg = 0;
    int min_total = 0;
    int max_total = 0;
    int max_signals = 0;
};

StepLimits step_limits(const ResampleConfig& c, const ResampleDataset& data) {
    StepLimits s;
    s.min_leg = static_cast<int>(std::ceil(c.min_leg_years * c.steps_per_year - 1e-9));
    s.min_total = std::max(static_cast<int>(std::ceil(c.min_total_years * c.steps_per_year - 1e-9)), 2 * s.min_leg);
    s.max_total = std::min(static_cast<int>(std::floor(c.max_total_years * c.steps_per_year + 1e-9)),
                           data.n_steps());
    s.max_signals = c.max_signals > 0 ? c.max_signals : data.n_signals();
    return s;
}

}  // namespace

void validate_resample_config(const ResampleConfig& c, const ResampleDataset& data) {
    if (c.n_draws < 1) throw ValidationError("n_draws must be >= 1");
    if (!(c.steps_per_year > 0.0)) throw ValidationError("steps_per_year must be positive");
    if (!(c.min_leg_years > 0.0)) throw ValidationError("min_leg_years must be positive");
    if (c.max_total_years < c.min_total_years) throw ValidationError("max_total_years is below min_total_years");
    if (c.max_attempts_per_draw < 1) throw ValidationError("max_attempts_per_draw must be >= 1");
    if (data.n_signals() < 1) throw ValidationError("dataset has no signals");
    const StepLimits s = step_limits(c, data);
    if (c.min_signals < 1 || c.min_signals > s.max_signals || s.max_signals > data.n_signals()) {
        throw ValidationError("signal-count range [" + std::to_string(c.min_signals) + ", " +
                              std::to_string(s.max_signals) + "] is not within [1, " +
                              std::to_string(data.n_signals()) + "]");
    }
    if (s.min_total > s.max_total) {
        throw ValidationError("dataset has " + std::to_string(data.n_steps()) + " steps, fewer than the minimum " +
                              std::to_string(s.min_total) + " needed for two legs");
    }
}

std::vector<ResampleRecord> resample_study(const ResampleDataset& data, const ResampleConfig& config) {
    validate_resample_config(config, data);
    const StepLimits lim = step_limits(config, data);
    std::vector<ResampleRecord> records(config.n_draws);
    std::vector<char> exhausted(config.n_draws, 0);

    parallel_for(config.n_draws, config.threads, [&](int draw) {
        std::mt19937_64 rng = make_stream(config.seed, static_cast<std::uint64_t>(draw), StreamTag::Resample);
        ResampleRecord& rec = records[draw];
        rec.draw = draw;
        std::vector<int> pool(data.n_signals());
        bool found = false;
        for (int attempt = 1; attempt <= config.max_attempts_per_draw && !found; ++attempt) {
            rec.attempts = attempt;
            const int p = std::uniform_int_distribution<int>(config.min_signals, lim.max_signals)(rng);
            const int len = std::uniform_int_distribution<int>(lim.min_total, lim.max_total)(rng);
            const int start = std::uniform_int_distribution<int>(0, data.n_steps() - len)(rng);
            const int t1 = std::uniform_int_distribution<int>(lim.min_leg, len - lim.min_leg)(rng);
            std::iota(pool.begin(), pool.end(), 0);
            for (int i = 0; i < p; ++i) {
                const int j = std::uniform_int_distribution<int>(i, data.n_signals() - 1)(rng);
                std::swap(pool[i], pool[j]);
            }
            std::vector<int> chosen(pool.begin(), pool.begin() + p);
            std::sort(chosen.begin(), chosen.end());

            if (t1 <= p + 2) continue;
            const int end = start + len - 1;
            if (data.return_coverage.first > start || data.return_coverage.second < end) continue;
            bool covered = data.returns.segment(start, len).allFinite();
            for (int j : chosen) {
                covered = covered && data.coverage[j].first <= start && data.coverage[j].second >= end &&
                          data.signals.row(j).segment(start, len).allFinite();
            }
            if (!covered) continue;

            found = true;
            rec.signals = chosen;
            rec.start = start;
            rec.t1 = t1;
            rec.t2 = len - t1;
        }
        if (!found) {
            exhausted[draw] = 1;
            return;
        }

        const int p = rec.p();
        const int len = rec.t1 + rec.t2;
        MatrixXd s(p, len);
        for (int i = 0; i < p; ++i) s.row(i) = data.signals.row(rec.signals[i]).segment(rec.start, len);
        const MatrixXd r = data.returns.segment(rec.start, len).transpose();
        try {
            MatrixXd white;
            if (config.whitening == WhiteningWindow::FullWindow) {
                white = whiten_signals(s).signals;
            } else {
                white = apply_whitening(whiten_signals(s.leftCols(rec.t1)), s);
            }
            MatrixXd design(p + 1, len);
            design.row(0).setOnes();
            design.bottomRows(p) = white;
            const FitResult fit = ols_fit({r.leftCols(rec.t1), design.leftCols(rec.t1), {}});
            const MatrixXd sigma_hat = sample_covariance(fit.residuals, true);
            rec.sigma_eps_hat = sigma_hat(0, 0);
            if (!(rec.sigma_eps_hat > 0.0)) throw NumericalError("zero in-sample residual variance");
            const MatrixXd z = sigma_hat.inverse();
            rec.is = run_backtest(fit.beta_hat, z, design.leftCols(rec.t1), r.leftCols(rec.t1)).stats;
            rec.oos = run_backtest(fit.beta_hat, z, design.rightCols(rec.t2), r.rightCols(rec.t2)).stats;
        } catch (const NumericalError&) {
            rec.fit_failed = true;
            return;
        }
        if (!rec.oos.sharpe_defined) return;

        CalibrationTarget target{rec.oos.sharpe, p, rec.t1, MatrixXd::Constant(1, 1, rec.sigma_eps_hat), true};
        try {
            const CalibrationResult cal = implied_beta(target, config.calibration_tol);
            rec.status = cal.status;
            rec.k = cal.k;
            rec.supremum = cal.supremum;
        } catch (const UnreachableTargetError& e) {
            rec.status = CalibrationStatus::AboveSupremum;
            rec.k = kNaN;
            rec.supremum = e.supremum();
            return;
        }
        const AnalyticResult a = analyze(implied_spec(target, rec.k), {rec.t1, rec.t2});
        rec.sr_true = a.sharpe.sr_true;
        rec.sr_eis = a.sharpe.sr_eis;
        rec.sr_eoos = a.sharpe.sr_eoos;
        rec.replication = a.sharpe.replication_ratio;
        rec.analytic_defined = a.sharpe.replication_defined;
    });

    for (int d = 0; d < config.n_draws; ++d) {
        if (exhausted[d]) {
            throw ValidationError("draw " + std::to_string(d) + " found no fully covered signal set and period in " +
                                  std::to_string(config.max_attempts_per_draw) + " attempts");
        }
    }
    return records;
}

std::string to_string(BinKey key) {
    switch (key) {
        case BinKey::P: return "p";
        case BinKey::T1: return "t1";
        case BinKey::ImpliedSR: return "implied_sr";
    }
    return "p";
}

BinKey bin_key_from_string(const std::string& name) {
    if (name == "p") return BinKey::P;
    if (name == "t1") return BinKey::T1;
    if (name == "implied_sr") return BinKey::ImpliedSR;
    throw ValidationError("unknown bin key '" + name + "'");
}

double bin_key_value(const ResampleRecord& r, BinKey key) {
    switch (key) {
        case BinKey::P: return r.p();
        case BinKey::T1: return r.t1;
        case BinKey::ImpliedSR: return r.analytic_defined ? r.sr_true : kNaN;
    }
    return kNaN;
}

std::vector<ReplicationBin> bin_records(const std::vector<ResampleRecord>& records, BinKey key, int n_bins) {
    if (n_bins < 1) throw ValidationError("n_bins must be >= 1");
    std::vector<const ResampleRecord*> eligible;
    std::vector<double> keys;
    for (const ResampleRecord& r : records) {
        const double k = bin_key_value(r, key);
        if (!std::isfinite(k) || !(empirical_defined(r) || r.analytic_defined)) continue;
        eligible.push_back(&r);
        keys.push_back(k);
    }
    std::vector<ReplicationBin> bins;
    if (eligible.empty()) return bins;

    std::vector<double> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int b = 1; b < n_bins; ++b) {
        const double e = sorted[static_cast<std::size_t>(b) * sorted.size() / n_bins];
        if (e < sorted.back() && (edges.empty() || e > edges.back())) edges.push_back(e);
    }

    const std::size_t n_out = edges.size() + 1;
    std::vector<std::vector<std::size_t>> members(n_out);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t b = std::upper_bound(edges.begin(), edges.end(), keys[i]) - edges.begin();
        members[b].push_back(i);
    }

    for (std::size_t b = 0; b < n_out; ++b) {
        if (members[b].empty()) continue;
        ReplicationBin out;
        out.key = key;
        out.bin = static_cast<int>(bins.size());
        out.key_min = std::numeric_limits<double>::infinity();
        out.key_max = -out.key_min;
        double key_sum = 0.0;
        std::vector<double> is_sr, oos_sr, ratio, eis, eoos, repl;
        for (std::size_t i : members[b]) {
            const ResampleRecord& r = *eligible[i];
            out.key_min = std::min(out.key_min, keys[i]);
            out.key_max = std::max(out.key_max, keys[i]);
            key_sum += keys[i];
            if (empirical_defined(r)) {
                is_sr.push_back(r.is.sharpe);
                oos_sr.push_back(r.oos.sharpe);
                if (r.is.sharpe != 0.0) ratio.push_back(r.oos.sharpe / r.is.sharpe);
            }
            if (r.analytic_defined) {
                eis.push_back(r.sr_eis);
                eoos.push_back(r.sr_eoos);
                repl.push_back(r.replication);
            }
        }
        out.key_mean = key_sum / static_cast<double>(members[b].size());
        out.count = static_cast<int>(is_sr.size());
        out.analytic_count = static_cast<int>(eis.size());
        out.ratio_of_expectations = ratio_estimate(oos_sr, is_sr);
        out.expectation_of_ratio = mean_estimate(ratio);
        out.analytic_ratio_of_expectations = ratio_estimate(eoos, eis);
        out.analytic_expectation_of_ratio = mean_estimate(repl);
        bins.push_back(out);
    }
    return bins;
}

}  // namespace overfit
