#include "overfit/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "overfit/error.hpp"
#include "overfit/rng.hpp"

namespace overfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::Index dynamic_count(const ModelSpec& spec) { return spec.p() - (spec.has_intercept ? 1 : 0); }

MatrixXd dynamic_block(const ModelSpec& spec) {
    const Eigen::Index k = dynamic_count(spec);
    return spec.sigma_s.bottomRightCorner(k, k);
}

// Lower factor L with L L' = a for a symmetric PSD matrix.
MatrixXd psd_factor(const MatrixXd& a) {
    if (a.size() == 0) return a;
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
    const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

double spectral_radius(const MatrixXd& phi) {
    Eigen::EigenSolver<MatrixXd> es(phi, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

VectorXd broadcast_dof(const VectorXd& dof, Eigen::Index n) {
    return dof.size() == 1 ? VectorXd::Constant(n, dof(0)) : dof;
}

void check_dof(const VectorXd& dof, Eigen::Index n, const char* what) {
    if (dof.size() != 1 && dof.size() != n) {
        throw ValidationError(std::string(what) + " dof must have 1 or " + std::to_string(n) + " entries");
    }
    if ((dof.array() <= 2.0).any()) throw ValidationError(std::string(what) + " dof must exceed 2");
}

MatrixXd shock_covariance(const SimulationConfig& config, const MatrixXd& sigma_dyn) {
    if (config.shock_cov) return *config.shock_cov;
    return symmetrize(sigma_dyn - config.phi * sigma_dyn * config.phi.transpose());
}

// Unit-variance shock: Gaussian, or Student-t rescaled by sqrt((nu-2)/nu).
class ShockDraw {
public:
    explicit ShockDraw(const VectorXd& dof) {
        for (Eigen::Index i = 0; i < dof.size(); ++i) {
            t_.emplace_back(dof(i));
            scale_.push_back(std::sqrt((dof(i) - 2.0) / dof(i)));
        }
    }

    void fill(Eigen::Ref<VectorXd> out, std::mt19937_64& rng) {
        if (t_.empty()) {
            for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal_(rng);
            return;
        }
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = scale_[i] * t_[i](rng);
    }

private:
    std::normal_distribution<double> normal_;
    std::vector<std::student_t_distribution<double>> t_;
    std::vector<double> scale_;
};

Estimate estimate_of(const std::vector<double>& xs) {
    Estimate e;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return {kNaN, kNaN};
    double sum = 0.0;
    for (double x : xs) sum += x;
    e.value = sum / n;
    if (xs.size() < 2) {
        e.se = kNaN;
        return e;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - e.value) * (x - e.value);
    e.se = std::sqrt(ss / (n - 1.0) / n);
    return e;
}

double se_of(const std::vector<double>& influence) { return estimate_of(influence).se; }

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return kNaN;
    const std::size_t k = static_cast<std::size_t>(std::floor(q * (xs.size() - 1)));
    std::nth_element(xs.begin(), xs.begin() + k, xs.end());
    return xs[k];
}

struct PeriodAggregate {
    PeriodSummary summary;
    std::vector<double> ratio_influence;  // per ok path, for the ratio of ratio_sharpe values
};

PeriodAggregate summarize(const std::vector<const SampleStats*>& stats) {
    PeriodAggregate out;
    PeriodSummary& s = out.summary;
    std::vector<double> means, vars, sharpes;
    means.reserve(stats.size());
    vars.reserve(stats.size());
    for (const SampleStats* st : stats) {
        means.push_back(st->mean);
        vars.push_back(st->variance);
        if (st->sharpe_defined) {
            sharpes.push_back(st->sharpe);
        } else {
            ++s.degenerate_paths;
        }
    }
    s.mean = estimate_of(means);
    s.variance = estimate_of(vars);
    s.sharpe = estimate_of(sharpes);
    s.sharpe_q05 = quantile(sharpes, 0.05);
    s.sharpe_q50 = quantile(sharpes, 0.5);
    s.sharpe_q95 = quantile(sharpes, 0.95);

    const double a = s.mean.value;
    const double b = s.variance.value;
    if (b > 0.0) {
        const double root_b = std::sqrt(b);
        s.ratio_sharpe.value = a / root_b;
        std::vector<double> gap_infl;
        out.ratio_influence.resize(stats.size());
        for (std::size_t i = 0; i < stats.size(); ++i) {
            const double phi = (means[i] - a) / root_b - a * (vars[i] - b) / (2.0 * b * root_b);
            out.ratio_influence[i] = phi;
            if (stats[i]->sharpe_defined) gap_infl.push_back(stats[i]->sharpe - phi);
        }
        s.ratio_sharpe.se = se_of(out.ratio_influence);
        s.convexity_gap.value = s.sharpe.value - s.ratio_sharpe.value;
        s.convexity_gap.se = se_of(gap_infl);
    } else {
        s.ratio_sharpe = {kNaN, kNaN};
        s.convexity_gap = {kNaN, kNaN};
    }
    return out;
}

}  // namespace

std::string to_string(SignalKind kind) {
    switch (kind) {
        case SignalKind::GaussianIID: return "gaussian_iid";
        case SignalKind::AR1: return "ar1";
        case SignalKind::AR1StudentT: return "ar1_student_t";
    }
    return "gaussian_iid";
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::StudentT: return "student_t";
        case NoiseKind::None: return "none";
    }
    return "gaussian";
}

SignalKind signal_kind_from_string(const std::string& name) {
    if (name == "gaussian_iid") return SignalKind::GaussianIID;
    if (name == "ar1") return SignalKind::AR1;
    if (name == "ar1_student_t") return SignalKind::AR1StudentT;
    throw ValidationError("unknown signal kind '" + name + "'");
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "student_t") return NoiseKind::StudentT;
    if (name == "none") return NoiseKind::None;
    throw ValidationError("unknown noise kind '" + name + "'");
}

void validate_config(const SimulationConfig& config, const ModelSpec& spec) {
    if (config.n_paths < 1) throw ValidationError("n_paths must be >= 1");
    if (config.burn_in < 0) throw ValidationError("burn_in must be >= 0");
    const Eigen::Index k = dynamic_count(spec);
    if (config.signal_kind != SignalKind::GaussianIID) {
        if (config.phi.rows() != k || config.phi.cols() != k) {
            throw ValidationError("phi must be " + std::to_string(k) + " x " + std::to_string(k));
        }
        const double radius = k > 0 ? spectral_radius(config.phi) : 0.0;
        if (!(radius < 1.0)) {
            throw ValidationError("unstable AR(1): spectral radius " + std::to_string(radius) + " >= 1");
        }
        if (config.shock_cov) {
            if (config.shock_cov->rows() != k || config.shock_cov->cols() != k) {
                throw ValidationError("shock_cov must match the dynamic signal count");
            }
        }
        const MatrixXd q = shock_covariance(config, dynamic_block(spec));
        if (k > 0) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q, Eigen::EigenvaluesOnly);
            const double floor = -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
            if (eig.eigenvalues().minCoeff() < floor) {
                throw ValidationError("AR(1) shock covariance is not positive semi-definite");
            }
        }
        if (config.signal_kind == SignalKind::AR1StudentT) check_dof(config.signal_dof, k, "signal");
    }
    if (config.noise_kind == NoiseKind::StudentT) check_dof(config.noise_dof, spec.m(), "noise");
}

MatrixXd stationary_covariance(const MatrixXd& phi, const MatrixXd& q) {
    if (phi.size() == 0) return q;
    if (!(spectral_radius(phi) < 1.0)) throw ValidationError("unstable AR(1): spectral radius >= 1");
    MatrixXd x = q;
    MatrixXd a = phi;
    for (int it = 0; it < 200; ++it) {
        const MatrixXd step = a * x * a.transpose();
        x += step;
        a = a * a;
        if (step.cwiseAbs().maxCoeff() <= 1e-17 * x.cwiseAbs().maxCoeff()) break;
    }
    return symmetrize(x);
}

MatrixXd simulate_signals(const ModelSpec& spec, int t, const SimulationConfig& config,
                          std::uint64_t path_index) {
    if (t < 1) throw ValidationError("path length must be positive");
    const Eigen::Index p = spec.p();
    const Eigen::Index k = dynamic_count(spec);
    const Eigen::Index first = p - k;
    std::mt19937_64 rng = make_stream(config.seed, path_index, StreamTag::Signals);
    std::normal_distribution<double> n01;

    MatrixXd s(p, t);
    if (spec.has_intercept) s.row(0).setOnes();
    if (k == 0) return s;
    const VectorXd mu = spec.mu_s.tail(k);
    const MatrixXd sigma_dyn = dynamic_block(spec);

    if (config.signal_kind == SignalKind::GaussianIID) {
        const MatrixXd l = psd_factor(sigma_dyn);
        MatrixXd z(k, t);
        for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = n01(rng);
        s.bottomRows(k) = (l * z).colwise() + mu;
        return s;
    }

    if (config.phi.rows() != k || config.phi.cols() != k || !(spectral_radius(config.phi) < 1.0)) {
        throw ValidationError("AR(1) phi must be a stable " + std::to_string(k) + " x " + std::to_string(k) +
                              " matrix");
    }
    const MatrixXd q = shock_covariance(config, sigma_dyn);
    const MatrixXd lq = psd_factor(q);
    const MatrixXd stationary = config.shock_cov ? stationary_covariance(config.phi, q) : sigma_dyn;
    const MatrixXd l0 = psd_factor(stationary);
    ShockDraw shocks(config.signal_kind == SignalKind::AR1StudentT
                         ? broadcast_dof(config.signal_dof, k)
                         : VectorXd());

    VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = n01(rng);
    VectorXd x = l0 * z;
    for (int b = 0; b < config.burn_in; ++b) {
        shocks.fill(z, rng);
        x = config.phi * x + lq * z;
    }
    for (int c = 0; c < t; ++c) {
        s.block(first, c, k, 1) = x + mu;
        shocks.fill(z, rng);
        x = config.phi * x + lq * z;
    }
    return s;
}

MatrixXd simulate_returns(const ModelSpec& spec, const MatrixXd& signals,
                          const SimulationConfig& config, std::uint64_t path_index) {
    if (signals.rows() != spec.p()) throw ValidationError("signal rows do not match p");
    MatrixXd r = spec.beta * signals;
    if (config.noise_kind == NoiseKind::None) return r;

    const Eigen::Index m = spec.m();
    std::mt19937_64 rng = make_stream(config.seed, path_index, StreamTag::Noise);
    ShockDraw shocks(config.noise_kind == NoiseKind::StudentT ? broadcast_dof(config.noise_dof, m)
                                                              : VectorXd());
    MatrixXd e(m, signals.cols());
    for (Eigen::Index c = 0; c < e.cols(); ++c) shocks.fill(e.col(c), rng);
    r += psd_factor(spec.sigma_eps) * e;
    return r;
}

SampleStats sample_stats(const VectorXd& pnl) {
    if (pnl.size() < 2) throw ValidationError("sample variance needs at least 2 observations");
    SampleStats st;
    st.n = static_cast<int>(pnl.size());
    st.mean = pnl.mean();
    st.variance = (pnl.array() - st.mean).square().sum() / static_cast<double>(st.n - 1);
    st.sharpe_defined = st.variance > 0.0 && st.variance > 1e-24 * st.mean * st.mean;
    st.sharpe = st.sharpe_defined ? st.mean / std::sqrt(st.variance) : kNaN;
    return st;
}

Backtest run_backtest(const MatrixXd& beta_hat, const MatrixXd& z, const MatrixXd& signals,
                      const MatrixXd& returns) {
    if (beta_hat.cols() != signals.rows() || beta_hat.rows() != returns.rows() ||
        z.rows() != beta_hat.rows() || z.cols() != beta_hat.rows() || signals.cols() != returns.cols()) {
        throw ValidationError("backtest dimension mismatch");
    }
    Backtest out;
    const MatrixXd w = z * beta_hat * signals;
    out.pnl = w.cwiseProduct(returns).colwise().sum().transpose();
    out.stats = sample_stats(out.pnl);
    return out;
}

FitResult fit_beta(const StackedData& data, const FitMethod& method) {
    switch (method.kind) {
        case FitKind::OLS: return ols_fit(data);
        case FitKind::Ridge: return ridge_fit(data, method.gamma);
        case FitKind::Panel: return panel_fit(data, method.grouping);
    }
    return ols_fit(data);
}

MatrixXd trading_weights(const ModelSpec& spec, CovMode mode, const MatrixXd& residuals) {
    if (mode == CovMode::TrueCov) return weight_matrix(spec);
    ModelSpec estimated = spec;
    const int t_eff = static_cast<int>(residuals.cols()) - 1;
    estimated.sigma_eps = shrink_covariance(sample_covariance(residuals, true), t_eff);
    return weight_matrix(estimated);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

ExperimentResult monte_carlo_experiment(const ModelSpec& spec, const BacktestWindow& window,
                                        const SimulationConfig& config,
                                        const ExperimentOptions& options) {
    require_valid(spec);
    check_window(window, spec.p());
    if (window.t2 < 2) throw ValidationError("out-of-sample window needs at least 2 steps");
    validate_config(config, spec);

    ExperimentResult result;
    if (options.attach_analytic) result.analytic = analyze(spec, window);
    result.n_paths = config.n_paths;

    const int t1 = window.t1;
    const int t2 = window.t2;
    std::vector<PathRecord> records(config.n_paths);
    parallel_for(config.n_paths, config.threads, [&](int i) {
        PathRecord& rec = records[i];
        try {
            const MatrixXd s = simulate_signals(spec, t1 + t2, config, static_cast<std::uint64_t>(i));
            const MatrixXd r = simulate_returns(spec, s, config, static_cast<std::uint64_t>(i));
            StackedData is_data{r.leftCols(t1), s.leftCols(t1), {}};
            const FitResult fit = fit_beta(is_data, options.fit);
            const MatrixXd z = trading_weights(spec, options.cov, fit.residuals);
            rec.is = run_backtest(fit.beta_hat, z, is_data.signals, is_data.returns).stats;
            rec.oos = run_backtest(fit.beta_hat, z, s.rightCols(t2), r.rightCols(t2)).stats;
        } catch (const NumericalError&) {
            rec.failed = true;
        }
    });

    std::vector<const SampleStats*> is_stats, oos_stats;
    std::vector<double> gaps;
    for (const PathRecord& rec : records) {
        if (rec.failed) {
            ++result.failed_paths;
            continue;
        }
        is_stats.push_back(&rec.is);
        oos_stats.push_back(&rec.oos);
        gaps.push_back(rec.is.mean - rec.oos.mean);
    }
    if (is_stats.empty()) throw NumericalError("every Monte Carlo path failed to fit");
    result.se_defined = is_stats.size() >= 2;

    const PeriodAggregate is_agg = summarize(is_stats);
    const PeriodAggregate oos_agg = summarize(oos_stats);
    result.is = is_agg.summary;
    result.oos = oos_agg.summary;
    result.mean_gap = estimate_of(gaps);

    // E[SR_OOS] / E[SR_IS] over paths where both Sharpe ratios exist.
    std::vector<double> x, y, path_ratio;
    for (std::size_t i = 0; i < is_stats.size(); ++i) {
        if (!is_stats[i]->sharpe_defined || !oos_stats[i]->sharpe_defined) continue;
        x.push_back(oos_stats[i]->sharpe);
        y.push_back(is_stats[i]->sharpe);
        if (is_stats[i]->sharpe != 0.0) path_ratio.push_back(oos_stats[i]->sharpe / is_stats[i]->sharpe);
    }
    if (!y.empty()) {
        const Estimate ex = estimate_of(x);
        const Estimate ey = estimate_of(y);
        const double ratio = ex.value / ey.value;
        std::vector<double> infl(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) infl[i] = (x[i] - ratio * y[i]) / ey.value;
        result.replication = {ratio, se_of(infl)};
    } else {
        result.replication = {kNaN, kNaN};
    }
    result.mean_path_ratio = estimate_of(path_ratio);

    const double rs_is = result.is.ratio_sharpe.value;
    const double rs_oos = result.oos.ratio_sharpe.value;
    if (!is_agg.ratio_influence.empty() && !oos_agg.ratio_influence.empty() && rs_is != 0.0) {
        const double er = rs_oos / rs_is;
        std::vector<double> infl(is_agg.ratio_influence.size());
        for (std::size_t i = 0; i < infl.size(); ++i) {
            infl[i] = (oos_agg.ratio_influence[i] - er * is_agg.ratio_influence[i]) / rs_is;
        }
        result.expected_replication = {er, se_of(infl)};
    } else {
        result.expected_replication = {kNaN, kNaN};
    }

    if (options.keep_paths) result.paths = std::move(records);
    return result;
}

MatrixXd sample_lkj(int d, double eta, std::mt19937_64& rng) {
    if (d < 1) throw ValidationError("LKJ dimension must be positive");
    if (!(eta > 0.0)) throw ValidationError("LKJ eta must be positive");
    MatrixXd partial = MatrixXd::Zero(d, d);
    MatrixXd corr = MatrixXd::Identity(d, d);
    double b = eta + (d - 1) / 2.0;
    for (int k = 0; k < d - 1; ++k) {
        b -= 0.5;
        std::gamma_distribution<double> g(b, 1.0);
        for (int i = k + 1; i < d; ++i) {
            const double u = g(rng);
            const double v = g(rng);
            partial(k, i) = 2.0 * u / (u + v) - 1.0;
            double rho = partial(k, i);
            for (int l = k - 1; l >= 0; --l) {
                rho = rho * std::sqrt((1.0 - partial(l, i) * partial(l, i)) *
                                      (1.0 - partial(l, k) * partial(l, k))) +
                      partial(l, i) * partial(l, k);
            }
            corr(k, i) = corr(i, k) = rho;
        }
    }
    return corr;
}

ModelSpec sample_random_model(int m, int p, std::optional<double> target_sr, std::uint64_t seed,
                              const RandomModelOptions& options) {
    if (m < 1 || p < 1) throw ValidationError("m and p must be positive");
    if (!(options.chi2_dof > 0.0)) throw ValidationError("chi-squared dof must be positive");
    if (target_sr && *target_sr < 0.0) throw ValidationError("target Sharpe must be non-negative");
    std::mt19937_64 rng = make_stream(seed, 0, StreamTag::RandomModel);

    const MatrixXd sigma_s = sample_lkj(p, options.lkj_eta, rng);
    const MatrixXd corr_eps = sample_lkj(m, options.lkj_eta, rng);
    std::chi_squared_distribution<double> chi2(options.chi2_dof);
    VectorXd sd(m);
    for (int i = 0; i < m; ++i) sd(i) = std::sqrt(chi2(rng) / options.chi2_dof);
    const MatrixXd sigma_eps = symmetrize(sd.asDiagonal() * corr_eps * sd.asDiagonal());

    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution coin(0.5);
    MatrixXd beta(m, p);
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta.data()[i] = (coin(rng) ? 1.0 : -1.0) * expo(rng);

    ModelSpec spec = make_standard_spec(beta, sigma_eps);
    spec.sigma_s = sigma_s;
    if (!target_sr) return spec;
    if (*target_sr == 0.0) {
        spec.beta.setZero();
        return spec;
    }

    // Under beta -> c beta: mean c^2 a, variance c^4 b + c^2 d, so SR rises
    // monotonically to a / sqrt(b) and the scale solves in closed form.
    const DerivedMatrices dm = derive_matrices(spec);
    const MatrixXd gs = dm.g * sigma_s;
    const double a = gs.trace();
    const double b = 2.0 * (gs * gs).trace();
    const double d = (dm.f * sigma_s).trace();
    const double supremum = a / std::sqrt(b);
    const double target = *target_sr;
    if (!(target < supremum)) {
        throw ValidationError("target true Sharpe " + std::to_string(target) +
                              " unreachable; supremum over beta scaling is " + std::to_string(supremum));
    }
    const double c2 = d / (a * a / (target * target) - b);
    spec.beta *= std::sqrt(c2);
    return spec;
}

EpsilonEstimate estimate_epsilon(const ModelSpec& spec, const BacktestWindow& window, int n_paths,
                                 std::uint64_t seed, int threads) {
    if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
    SimulationConfig config;
    config.n_paths = n_paths;
    config.seed = seed;
    config.threads = threads;
    BacktestWindow w = window;
    w.t2 = std::max(w.t2, 2);
    const ExperimentResult r = monte_carlo_experiment(spec, w, config);
    EpsilonEstimate out;
    out.simulated_is_var = r.is.variance.value;
    out.analytic_is_var = r.analytic.moments.is_var;
    out.epsilon = out.simulated_is_var - out.analytic_is_var;
    out.se = r.is.variance.se;
    out.percent = 100.0 * out.epsilon / out.simulated_is_var;
    return out;
}

ConvexityGap convexity_gap(const ModelSpec& spec, const BacktestWindow& window, int n_paths,
                           std::uint64_t seed, int threads) {
    if (n_paths < 1) throw ValidationError("n_paths must be >= 1");
    SimulationConfig config;
    config.n_paths = n_paths;
    config.seed = seed;
    config.threads = threads;
    ExperimentOptions options;
    options.attach_analytic = false;
    const ExperimentResult r = monte_carlo_experiment(spec, window, config, options);
    ConvexityGap out;
    out.is_gap = r.is.convexity_gap;
    out.oos_gap = r.oos.convexity_gap;
    out.defined = r.se_defined;
    return out;
}

}  // namespace overfit
