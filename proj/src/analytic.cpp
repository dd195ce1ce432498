#include "overfit/analytic.hpp"

#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "overfit/error.hpp"
#include "overfit/special_functions.hpp"

namespace overfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sq(double x) { return x * x; }

bool near_identity(const MatrixXd& a) {
    return (a - MatrixXd::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff() <= 1e-12;
}

void require_t1(int t1, Eigen::Index p) {
    if (t1 <= p + 1) {
        throw ValidationError("degenerate window: t1=" + std::to_string(t1) +
                              " must exceed p+1=" + std::to_string(p + 1));
    }
}

// Root of f on [lo, hi] where f(lo) and f(hi) bracket zero.
template <class F>
double bracketed_root(F f, double lo, double hi) {
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t max_iter = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
    return 0.5 * (a + b);
}

}  // namespace

MomentConstants moment_constants(Eigen::Index p_idx, Eigen::Index m_idx, int t1) {
    require_t1(t1, p_idx);
    const double p = static_cast<double>(p_idx);
    const double m = static_cast<double>(m_idx);
    const double t = static_cast<double>(t1);
    const double dof = t - p - 1.0;

    MomentConstants c;
    c.c1 = 1.0 + (p + 1.0) / dof;
    c.c1_tilde = (2.0 * p + 5.0) / dof + 2.0 * m * (p * p + p + 2.0 * t) / (t * dof);
    c.c2 = m * p / dof;
    c.c2_tilde = m * p * (2.0 * m + p + t + 4.0) / (t * (t + 2.0)) -
                 2.0 * m * m * p * p / (t * t * (t + 2.0)) - m * p / dof;
    return c;
}

MomentSummary with_simulated_epsilon(MomentSummary moments, double epsilon) {
    moments.is_var += epsilon - moments.epsilon;
    moments.epsilon = epsilon;
    moments.epsilon_policy = EpsilonPolicy::SimulatedEstimate;
    return moments;
}

PnlMoments true_pnl_moments(const ModelSpec& spec) {
    require_valid(spec);
    const DerivedMatrices d = derive_matrices(spec);
    const MatrixXd& s = spec.sigma_s;
    const VectorXd& mu = spec.mu_s;
    const MatrixXd gs = d.g * s;

    PnlMoments out;
    out.mean = gs.trace() + mu.dot(d.g * mu);
    out.variance = 2.0 * (gs * gs).trace() + 4.0 * mu.dot(d.g * s * d.g * mu) + (d.f * s).trace() +
                   mu.dot(d.f * mu);
    return out;
}

double true_sharpe(const ModelSpec& spec) {
    const PnlMoments pm = true_pnl_moments(spec);
    if (pm.mean == 0.0 && pm.variance <= 0.0) return 0.0;
    if (pm.variance <= 0.0) throw NumericalError("true PnL variance is not positive");
    return pm.mean / std::sqrt(pm.variance);
}

MomentSummary expected_moments_special(const ModelSpec& spec, const BacktestWindow& window) {
    require_valid(spec);
    if (spec.weight_rule.kind != WeightRule::Kind::Precision || spec.has_intercept ||
        spec.mu_s.cwiseAbs().maxCoeff() != 0.0 || !near_identity(spec.sigma_s)) {
        throw ValidationError("special case requires Z=Sigma_eps^-1, mu_s=0, Sigma_s=I");
    }
    check_window(window, spec.p());

    const MatrixXd gamma = derive_matrices(spec).gamma;
    const double tr_gamma = gamma.trace();
    const double tr_gamma2 = (gamma * gamma).trace();
    const MomentConstants c = moment_constants(spec.p(), spec.m(), window.t1);
    const double pm = static_cast<double>(spec.p() * spec.m());

    MomentSummary out;
    out.oos_mean = tr_gamma;
    out.is_mean = tr_gamma + pm / window.t1;
    out.oos_var = 2.0 * tr_gamma2 + c.c1 * tr_gamma + c.c2;
    out.is_var = 2.0 * tr_gamma2 + (c.c1 + c.c1_tilde) * tr_gamma + c.c2 + c.c2_tilde;
    out.constants = c;
    return out;
}

MomentSummary expected_moments_general(const ModelSpec& spec, const BacktestWindow& window) {
    require_valid(spec);
    check_window(window, spec.p());

    const DerivedMatrices d = derive_matrices(spec);
    const MatrixXd& g = d.g;
    const MatrixXd& f = d.f;
    const MatrixXd& s = spec.sigma_s;
    const VectorXd& mu = spec.mu_s;
    const Eigen::Index p_idx = spec.p();
    const double p = static_cast<double>(p_idx);
    const double t = static_cast<double>(window.t1);
    const double dof = t - p - 1.0;

    const MatrixXd second_moment = s + mu * mu.transpose();
    Eigen::FullPivLU<MatrixXd> lu(second_moment);
    if (!lu.isInvertible()) throw NumericalError("Sigma_s + mu_s mu_s' is singular");
    const MatrixXd second_inv = lu.inverse();
    const MatrixXd centred_ratio = second_inv * (s - mu * mu.transpose());
    const MatrixXd dmat = second_inv / dof;

    const MatrixXd z = weight_matrix(spec);
    const MatrixXd z_eps = z * spec.sigma_eps;
    const double tr_z_eps = z_eps.trace();
    const double tr_z_eps_sq = (z_eps * z_eps).trace();
    const double ones_mu = mu.sum();

    const MatrixXd gs = g * s;
    const double mu_g_mu = mu.dot(g * mu);
    const double mu_f_mu = mu.dot(f * mu);
    const double true_mean = gs.trace() + mu_g_mu;
    const double true_var =
        2.0 * (gs * gs).trace() + 4.0 * mu.dot(g * s * g * mu) + (f * s).trace() + mu_f_mu;

    MomentSummary out;
    out.oos_mean = true_mean;
    out.is_mean = true_mean + p / t * tr_z_eps;

    // In-sample variance.
    const double f_term = (2.0 * f * second_moment).trace() + mu_f_mu * centred_ratio.trace() +
                          p * (f * s).trace();
    const double g_term = (2.0 * g * second_moment).trace() + mu_g_mu * centred_ratio.trace() +
                          p * gs.trace();
    const double denom = t * t * (t + 1.0) * (t + 2.0);
    const double noise_sq_coef =
        p * (p + t + 4.0) / (t * (t + 2.0)) - 2.0 * ones_mu * (p - t - 2.0) * (p - t) / denom;
    const double noise_cross_coef =
        2.0 * (p - t) * ((p - 2.0) * ones_mu + t * (p - ones_mu) + p) / denom;

    out.is_var = true_var + 3.0 / dof * f_term + tr_z_eps_sq * noise_sq_coef -
                 sq(tr_z_eps) * noise_cross_coef + 2.0 / dof * tr_z_eps * g_term -
                 2.0 * p / t * tr_z_eps * true_mean;

    // Out-of-sample variance.
    const MatrixXd st = s.transpose();
    const double tr_st_d = (st * dmat).trace();
    const double tr_f_st = (f * st).trace();
    out.oos_var = true_var +
                  mu.dot((2.0 * dmat * st * f + tr_f_st * dmat + tr_st_d * f) * mu) +
                  (dmat * st * f * s).trace() + (dmat * s).trace() * tr_f_st +
                  tr_z_eps_sq * (tr_st_d + mu.dot(dmat * mu));
    return out;
}

SharpeReport expected_sharpes(const MomentSummary& moments, double annualization) {
    if (!(moments.is_var > 0.0) || !(moments.oos_var > 0.0)) {
        throw NumericalError("expected variances must be positive");
    }
    SharpeReport r;
    r.annualization_factor = annualization;
    r.sr_true = kNaN;
    r.sr_eis = moments.is_mean / std::sqrt(moments.is_var) * annualization;
    r.sr_eoos = moments.oos_mean / std::sqrt(moments.oos_var) * annualization;
    if (moments.oos_mean == 0.0) {
        r.sr_eoos = 0.0;
        r.informationless = true;
    }
    if (r.sr_eis == 0.0) {
        r.replication_defined = false;
        r.replication_ratio = kNaN;
    } else {
        r.replication_ratio = r.sr_eoos / r.sr_eis;
    }
    return r;
}

AnalyticResult analyze(const ModelSpec& spec, const BacktestWindow& window, double annualization) {
    AnalyticResult out;
    out.moments = expected_moments_general(spec, window);
    const bool special = spec.weight_rule.kind == WeightRule::Kind::Precision &&
                         !spec.has_intercept && spec.mu_s.cwiseAbs().maxCoeff() == 0.0 &&
                         near_identity(spec.sigma_s);
    if (special) out.moments.constants = moment_constants(spec.p(), spec.m(), window.t1);
    out.sharpe = expected_sharpes(out.moments, annualization);
    out.sharpe.sr_true = true_sharpe(spec) * annualization;
    return out;
}

double univariate_replication(double beta, int t1) {
    if (t1 <= 2) throw ValidationError("univariate replication requires t1 > 2");
    const double t = static_cast<double>(t1);
    const double b2 = beta * beta;
    const double b4 = b2 * b2;
    const double is_var = 2.0 * b4 + (1.0 + 15.0 / (t - 2.0) - 2.0 / t) * b2 + 4.0 / t -
                          3.0 / (t + 2.0) - 1.0 / (t * t);
    const double oos_var = 2.0 * b4 + (1.0 + 2.0 / (t - 2.0)) * b2 + 1.0 / (t - 2.0);
    return b2 * std::sqrt(is_var) / ((b2 + 1.0 / t) * std::sqrt(oos_var));
}

UniformBetaSharpes uniform_beta_sharpes(double k, int p, int m, int t1) {
    if (p < 1 || m < 1) throw ValidationError("p and m must be positive");
    const MomentConstants c = moment_constants(p, m, t1);
    const double pm = static_cast<double>(p) * m;
    const double x = k * k * pm;
    UniformBetaSharpes out;
    out.sr_eis = (x + pm / t1) / std::sqrt(2.0 * x * x + (c.c1 + c.c1_tilde) * x + c.c2 + c.c2_tilde);
    out.sr_eoos = x / std::sqrt(2.0 * x * x + c.c1 * x + c.c2);
    return out;
}

double uniform_beta_replication(double k, int p, int m, int t1) {
    if (p < 1 || m < 1) throw ValidationError("p and m must be positive");
    const MomentConstants c = moment_constants(p, m, t1);
    const double pm = static_cast<double>(p) * m;
    const double x = k * k * pm;
    return x / (x + pm / t1) *
           std::sqrt(2.0 * x * x + (c.c1 + c.c1_tilde) * x + c.c2 + c.c2_tilde) /
           std::sqrt(2.0 * x * x + c.c1 * x + c.c2);
}

double uniform_beta_k_for_true_sharpe(double theta, int p, int m) {
    if (theta < 0.0 || theta * theta >= 0.5) {
        throw ValidationError("uniform-beta true Sharpe must lie in [0, 1/sqrt(2))");
    }
    // SR = x / sqrt(2x^2 + x) with x = k^2 p m.
    const double x = theta * theta / (1.0 - 2.0 * theta * theta);
    return std::sqrt(x / (static_cast<double>(p) * m));
}

std::optional<double> uniform_beta_k_for_sr_eis(double target, int p, int m, int t1) {
    const double pm = static_cast<double>(p) * m;
    auto sr_eis_of_x = [&](double x) {
        return uniform_beta_sharpes(std::sqrt(x / pm), p, m, t1).sr_eis - target;
    };
    double lo = 0.0;
    double f_lo = sr_eis_of_x(lo);
    if (f_lo == 0.0) return 0.0;
    if (f_lo > 0.0) return std::nullopt;  // smallest reachable SR_EIS already above target
    for (double hi = 1e-8; hi < 1e8; hi *= 1.5) {
        const double f_hi = sr_eis_of_x(hi);
        if (f_hi >= 0.0) {
            const double x = bracketed_root(sr_eis_of_x, lo, hi);
            return std::sqrt(x / pm);
        }
        lo = hi;
    }
    return std::nullopt;
}

double ar1_true_sharpe(double beta, double phi) {
    if (!(std::abs(phi) < 1.0)) throw ValidationError("non-stationary signal: |phi| must be < 1");
    const double sign = beta < 0.0 ? -1.0 : 1.0;
    const double b = std::abs(beta);
    return sign * b / std::sqrt(1.0 + 2.0 * b * b - phi * phi);
}

double ar1_beta_for_true_sharpe(double sr, double phi) {
    if (!(std::abs(phi) < 1.0)) throw ValidationError("non-stationary signal: |phi| must be < 1");
    if (sr * sr >= 0.5) throw ValidationError("AR(1) true Sharpe must satisfy |sr| < 1/sqrt(2)");
    const double sign = sr < 0.0 ? -1.0 : 1.0;
    return sign * std::sqrt(sr * sr * (1.0 - phi * phi) / (1.0 - 2.0 * sr * sr));
}

namespace {

const SeriesControl kKanSeries{1e-14, 1'000'000};

void require_kan_domain(double theta, int m, int t) {
    if (m < 1) throw ValidationError("m must be positive");
    if (t <= m + 2) throw ValidationError("Gamma argument non-positive: t must exceed m+2");
    if (!(theta >= 0.0)) throw ValidationError("theta must be non-negative");
}

}  // namespace

double kan_expected_is_sr(double theta, int m, int t) {
    require_kan_domain(theta, m, t);
    const double md = m;
    const double td = t;
    const double log_prefactor = log_gamma((md + 1.0) / 2.0) + log_gamma((td - md - 1.0) / 2.0) -
                                 log_gamma(md / 2.0) - log_gamma((td - md) / 2.0);
    const Hyp1f1Result h = hyp1f1(-0.5, md / 2.0, -td * theta * theta / 2.0, kKanSeries);
    return h.sign * std::exp(log_prefactor + h.log_abs);
}

double kan_expected_oos_sr(double theta, int m, int t) {
    require_kan_domain(theta, m, t);
    if (theta == 0.0) return 0.0;
    const double md = m;
    const double td = t;
    const double log_prefactor = 2.0 * std::log(theta) + 0.5 * std::log(td) - 0.5 * std::log(2.0) +
                                 log_gamma((md + 1.0) / 2.0) + log_gamma((td - md + 2.0) / 2.0) +
                                 log_gamma(td / 2.0) - log_gamma((md + 2.0) / 2.0) -
                                 log_gamma((td - md + 1.0) / 2.0) - log_gamma((td + 1.0) / 2.0);
    const Hyp1f1Result h = hyp1f1(0.5, (md + 2.0) / 2.0, -td * theta * theta / 2.0, kKanSeries);
    return h.sign * std::exp(log_prefactor + h.log_abs);
}

std::vector<KanComparisonRow> kan_comparison_curve(double theta, int t,
                                                   const std::vector<int>& m_values, int p_ours) {
    std::vector<KanComparisonRow> rows;
    rows.reserve(m_values.size());
    for (int m : m_values) {
        KanComparisonRow row;
        row.m = m;
        row.kan_is = kan_expected_is_sr(theta, m, t);
        row.kan_oos = kan_expected_oos_sr(theta, m, t);
        row.kan_ratio = row.kan_oos / row.kan_is;
        row.ours_k = uniform_beta_k_for_true_sharpe(theta, p_ours, m);
        const UniformBetaSharpes s = uniform_beta_sharpes(row.ours_k, p_ours, m, t);
        row.ours_sr_eis = s.sr_eis;
        row.ours_sr_eoos = s.sr_eoos;
        row.ours_ratio = uniform_beta_replication(row.ours_k, p_ours, m, t);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace overfit
