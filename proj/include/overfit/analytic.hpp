#pragma once

#include <optional>
#include <vector>

#include "overfit/model.hpp"

namespace overfit {

// Finite-sample constants of the special-case moments.
struct MomentConstants {
    double c1 = 0.0;
    double c1_tilde = 0.0;
    double c2 = 0.0;
    double c2_tilde = 0.0;
};

MomentConstants moment_constants(Eigen::Index p, Eigen::Index m, int t1);

enum class EpsilonPolicy { DroppedZero, SimulatedEstimate };

// Expected per-step PnL mean and variance in and out of sample.
struct MomentSummary {
    double is_mean = 0.0;
    double oos_mean = 0.0;
    double is_var = 0.0;
    double oos_var = 0.0;
    std::optional<MomentConstants> constants;  // special case only
    EpsilonPolicy epsilon_policy = EpsilonPolicy::DroppedZero;
    double epsilon = 0.0;  // added to is_var under SimulatedEstimate
};

// Adds a simulated estimate of the epsilon terms to the in-sample variance.
MomentSummary with_simulated_epsilon(MomentSummary moments, double epsilon);

struct SharpeReport {
    double sr_true = 0.0;
    double sr_eis = 0.0;
    double sr_eoos = 0.0;
    double replication_ratio = 0.0;  // NaN when undefined
    bool replication_defined = true;
    bool informationless = false;  // zero expected OOS mean
    double annualization_factor = 1.0;
};

struct PnlMoments {
    double mean = 0.0;
    double variance = 0.0;
};

// Unconditional mean and variance of w_t' r_{t+1} under the true beta.
PnlMoments true_pnl_moments(const ModelSpec& spec);

// Per-step true Sharpe ratio; 0 when beta = 0.
double true_sharpe(const ModelSpec& spec);

// Precision weights, centred unit-covariance signals. Throws ValidationError
// outside that domain.
MomentSummary expected_moments_special(const ModelSpec& spec, const BacktestWindow& window);

// Full expression for arbitrary Z, mu_s and Sigma_s (epsilon terms dropped).
MomentSummary expected_moments_general(const ModelSpec& spec, const BacktestWindow& window);

SharpeReport expected_sharpes(const MomentSummary& moments, double annualization = 1.0);

// Moments, expected Sharpes and the true Sharpe in one call.
struct AnalyticResult {
    MomentSummary moments;
    SharpeReport sharpe;
};
AnalyticResult analyze(const ModelSpec& spec, const BacktestWindow& window,
                       double annualization = 1.0);

// Closed-form replication ratio for one asset and one unit-variance signal.
double univariate_replication(double beta, int t1);

// Replication ratio for beta = k * ones(m, p) with identity covariances and Z = I.
double uniform_beta_replication(double k, int p, int m, int t1);

// k such that the uniform-beta model has per-step true Sharpe ratio theta.
// Requires 0 <= theta < 1/sqrt(2).
double uniform_beta_k_for_true_sharpe(double theta, int p, int m);

// Smallest k >= 0 with uniform-beta SR_EIS equal to target, if one exists.
std::optional<double> uniform_beta_k_for_sr_eis(double target, int p, int m, int t1);

struct UniformBetaSharpes {
    double sr_eis = 0.0;
    double sr_eoos = 0.0;
};
UniformBetaSharpes uniform_beta_sharpes(double k, int p, int m, int t1);

// True Sharpe ratio of a unit-shock AR(1) signal traded with w_t = beta s_t.
double ar1_true_sharpe(double beta, double phi);

// Beta giving the AR(1) model a per-step true Sharpe ratio sr (|sr| < 1/sqrt(2)).
double ar1_beta_for_true_sharpe(double sr, double phi);

// Expected in-sample and out-of-sample Sharpe ratios of the plug-in
// Markowitz portfolio on m assets with T observations (constant means).
double kan_expected_is_sr(double theta, int m, int t);
double kan_expected_oos_sr(double theta, int m, int t);

struct KanComparisonRow {
    int m = 0;
    double kan_is = 0.0;
    double kan_oos = 0.0;
    double kan_ratio = 0.0;
    double ours_k = 0.0;
    double ours_sr_eis = 0.0;
    double ours_sr_eoos = 0.0;
    double ours_ratio = 0.0;
};

std::vector<KanComparisonRow> kan_comparison_curve(double theta, int t,
                                                   const std::vector<int>& m_values, int p_ours);

}  // namespace overfit
