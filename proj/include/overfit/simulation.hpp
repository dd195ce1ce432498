#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "overfit/analytic.hpp"
#include "overfit/estimation.hpp"
#include "overfit/model.hpp"

namespace overfit {

enum class SignalKind { GaussianIID, AR1, AR1StudentT };
enum class NoiseKind { Gaussian, StudentT, None };

// Dynamic signals exclude the intercept row when the spec has one.
struct SimulationConfig {
    SignalKind signal_kind = SignalKind::GaussianIID;
    MatrixXd phi;                        // AR(1) transition over the dynamic signals
    std::optional<MatrixXd> shock_cov;   // default: sigma_s - phi sigma_s phi'
    VectorXd signal_dof;                 // AR1StudentT, one entry per dynamic signal or one for all
    NoiseKind noise_kind = NoiseKind::Gaussian;
    VectorXd noise_dof;                  // StudentT, one entry per asset or one for all
    int n_paths = 1000;
    std::uint64_t seed = 0;
    int burn_in = 0;
    int threads = 0;  // 0: hardware concurrency
};

// Throws ValidationError for an unstable phi, dof <= 2, n_paths < 1 or
// dimension mismatches against spec.
void validate_config(const SimulationConfig& config, const ModelSpec& spec);

std::string to_string(SignalKind kind);
std::string to_string(NoiseKind kind);
SignalKind signal_kind_from_string(const std::string& name);
NoiseKind noise_kind_from_string(const std::string& name);

// Stationary covariance X = phi X phi' + q.
MatrixXd stationary_covariance(const MatrixXd& phi, const MatrixXd& q);

// p x t signal path for the given path index (Signals stream).
MatrixXd simulate_signals(const ModelSpec& spec, int t, const SimulationConfig& config,
                          std::uint64_t path_index);

// m x t returns; column k holds r_{k+1} = beta s_k + eps_{k+1} (Noise stream).
MatrixXd simulate_returns(const ModelSpec& spec, const MatrixXd& signals,
                          const SimulationConfig& config, std::uint64_t path_index);

struct SampleStats {
    double mean = 0.0;
    double variance = 0.0;  // 1/(n-1)
    double sharpe = 0.0;    // NaN when undefined
    int n = 0;
    bool sharpe_defined = false;
};

SampleStats sample_stats(const VectorXd& pnl);

struct Backtest {
    VectorXd pnl;
    SampleStats stats;
};

// PnL_k = (z beta_hat s_k)' r_{k+1} over aligned columns.
Backtest run_backtest(const MatrixXd& beta_hat, const MatrixXd& z, const MatrixXd& signals,
                      const MatrixXd& returns);

enum class FitKind { OLS, Ridge, Panel };

struct FitMethod {
    FitKind kind = FitKind::OLS;
    double gamma = 0.1;
    PanelGrouping grouping;

    static FitMethod ols() { return {}; }
    static FitMethod ridge(double gamma) { return {FitKind::Ridge, gamma, {}}; }
    static FitMethod panel(PanelGrouping g) { return {FitKind::Panel, 0.0, std::move(g)}; }
};

FitResult fit_beta(const StackedData& data, const FitMethod& method);

enum class CovMode { TrueCov, EstimatedCov };

// Z used for trading: the spec's weight rule applied either to the true
// residual covariance or to the shrunk in-sample residual covariance.
MatrixXd trading_weights(const ModelSpec& spec, CovMode mode, const MatrixXd& residuals);

struct Estimate {
    double value = 0.0;
    double se = 0.0;  // NaN when undefined
};

struct PeriodSummary {
    Estimate mean;      // average per-path sample mean
    Estimate variance;  // average per-path sample variance
    Estimate sharpe;    // average over paths with a defined Sharpe ratio
    Estimate ratio_sharpe;  // mean / sqrt(variance) of the averages, delta-method SE
    Estimate convexity_gap;  // sharpe - ratio_sharpe, paired SE
    double sharpe_q05 = 0.0;
    double sharpe_q50 = 0.0;
    double sharpe_q95 = 0.0;
    int degenerate_paths = 0;
};

struct PathRecord {
    SampleStats is;
    SampleStats oos;
    bool failed = false;
};

struct ExperimentResult {
    AnalyticResult analytic;
    PeriodSummary is;
    PeriodSummary oos;
    Estimate mean_gap;               // IS mean - OOS mean, paired SE
    Estimate replication;            // E[SR_OOS] / E[SR_IS], delta-method SE
    Estimate expected_replication;   // ratio of ratio_sharpe values
    Estimate mean_path_ratio;        // E[SR_OOS / SR_IS]
    int n_paths = 0;
    int failed_paths = 0;
    bool se_defined = true;
    std::vector<PathRecord> paths;   // filled when keep_paths is set
};

struct ExperimentOptions {
    FitMethod fit;
    CovMode cov = CovMode::TrueCov;
    bool keep_paths = false;
    bool attach_analytic = true;
};

ExperimentResult monte_carlo_experiment(const ModelSpec& spec, const BacktestWindow& window,
                                        const SimulationConfig& config,
                                        const ExperimentOptions& options = {});

struct RandomModelOptions {
    double lkj_eta = 2.0;
    double chi2_dof = 10.0;
};

// Random spec: LKJ correlations for signals and residuals, chi-squared residual
// variances, Laplace betas scaled to the target per-step true Sharpe ratio.
ModelSpec sample_random_model(int m, int p, std::optional<double> target_sr, std::uint64_t seed,
                              const RandomModelOptions& options = {});

// LKJ(eta) correlation matrix via the C-vine construction.
MatrixXd sample_lkj(int d, double eta, std::mt19937_64& rng);

struct EpsilonEstimate {
    double epsilon = 0.0;
    double se = 0.0;
    double percent = 0.0;  // of the simulated in-sample variance
    double simulated_is_var = 0.0;
    double analytic_is_var = 0.0;
};

EpsilonEstimate estimate_epsilon(const ModelSpec& spec, const BacktestWindow& window, int n_paths,
                                 std::uint64_t seed, int threads = 0);

struct ConvexityGap {
    Estimate is_gap;
    Estimate oos_gap;
    bool defined = true;
};

ConvexityGap convexity_gap(const ModelSpec& spec, const BacktestWindow& window, int n_paths,
                           std::uint64_t seed, int threads = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace overfit
