#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace overfit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Portfolio weight rule w_t = Z * beta * s_t.
struct WeightRule {
    enum class Kind { Precision, DiagInverse, Identity, Custom };

    Kind kind = Kind::Precision;
    MatrixXd custom;  // m x m, only read when kind == Custom

    static WeightRule precision() { return {Kind::Precision, {}}; }
    static WeightRule diag_inverse() { return {Kind::DiagInverse, {}}; }
    static WeightRule identity() { return {Kind::Identity, {}}; }
    static WeightRule custom_matrix(MatrixXd z) { return {Kind::Custom, std::move(z)}; }
};

std::string to_string(WeightRule::Kind kind);
WeightRule::Kind weight_kind_from_string(const std::string& name);

// Static linear model r_{t+1} = beta * s_t + eps_{t+1},
// s ~ N(mu_s, sigma_s), eps ~ N(0, sigma_eps).
struct ModelSpec {
    MatrixXd beta;       // m x p
    VectorXd mu_s;       // p
    MatrixXd sigma_s;    // p x p
    MatrixXd sigma_eps;  // m x m
    WeightRule weight_rule;
    bool has_intercept = false;

    Eigen::Index m() const { return beta.rows(); }
    Eigen::Index p() const { return beta.cols(); }
};

// Centred, unit-covariance signals with Markowitz weights and iid residuals.
ModelSpec make_standard_spec(const MatrixXd& beta, const MatrixXd& sigma_eps,
                             WeightRule rule = WeightRule::precision());

// Same as make_standard_spec but signal 0 is a constant intercept term.
ModelSpec make_intercept_spec(const MatrixXd& beta, const MatrixXd& sigma_eps,
                              const MatrixXd& dynamic_sigma_s,
                              WeightRule rule = WeightRule::precision());

struct BacktestWindow {
    int t1 = 0;  // in-sample steps
    int t2 = 0;  // out-of-sample steps
};

// Throws ValidationError unless t1 > p + 1 and t2 >= 1.
void check_window(const BacktestWindow& window, Eigen::Index p);

struct DerivedMatrices {
    MatrixXd g;      // beta' Z beta
    MatrixXd f;      // beta' Z Sigma_eps Z beta
    MatrixXd gamma;  // beta' Sigma_eps^{-1} beta
};

struct ValidationCheck {
    std::string name;
    bool passed = true;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationCheck> checks;
    double sigma_eps_min_eig = 0.0;
    double sigma_eps_max_eig = 0.0;
    double sigma_s_min_eig = 0.0;
    double sigma_s_max_eig = 0.0;

    // First failing check's message, empty when ok.
    std::string first_failure() const;
};

// Relative eigenvalue floor used for positive-definiteness tests.
inline constexpr double kPdRelTol = 1e-10;
inline constexpr double kSymmetryTol = 1e-10;

ValidationReport validate_model(const ModelSpec& spec);

// Throws ValidationError carrying the first violated invariant.
void require_valid(const ModelSpec& spec);

// Resolves the weight rule to the m x m matrix Z.
MatrixXd weight_matrix(const ModelSpec& spec);

DerivedMatrices derive_matrices(const ModelSpec& spec);

// (A + A') / 2
MatrixXd symmetrize(const MatrixXd& a);

bool is_symmetric(const MatrixXd& a, double rel_tol = kSymmetryTol);

// Smallest eigenvalue > kPdRelTol * largest eigenvalue.
bool is_positive_definite(const MatrixXd& a);

}  // namespace overfit
