#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace overfit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Column t of signals predicts column t of returns.
struct StackedData {
    MatrixXd returns;  // m x T
    MatrixXd signals;  // p x T
    std::vector<std::string> dates;  // optional, length T when loaded from files
};

// Throws ValidationError on column-count mismatch, or when intercept is set
// and signal row 0 is not identically 1.
void check_stacked(const StackedData& data, bool intercept = false);

struct FitResult {
    MatrixXd beta_hat;   // m x p
    MatrixXd residuals;  // m x T
};

// beta_hat = R S' (S S')^{-1}. Throws NumericalError naming collinear signal rows.
FitResult ols_fit(const StackedData& data);

// beta_hat = R S' (S S' + gamma T I)^{-1}; the penalty covers every coefficient.
FitResult ridge_fit(const StackedData& data, double gamma);

// group_of(i, j) is the coefficient index shared by asset i and signal j, or
// kFixedZero when that loading is held at zero.
struct PanelGrouping {
    static constexpr int kFixedZero = -1;
    Eigen::MatrixXi group_of;  // m x p
    int n_groups = 0;
};

PanelGrouping singleton_grouping(Eigen::Index m, Eigen::Index p);

// One coefficient per signal shared by all assets.
PanelGrouping shared_signal_grouping(Eigen::Index m, Eigen::Index p);

// Asset-specific signals: row 0 is an intercept (one group per asset when
// intercept is set), followed by n_families blocks of m rows where block f,
// row i is asset i's own member of family f. Each asset loads only on its own
// members, with one coefficient per family shared across assets.
PanelGrouping own_signal_family_grouping(Eigen::Index m, int n_families, bool intercept);

// Least squares with coefficients tied per group. Throws NumericalError when
// the grouped design is rank deficient.
FitResult panel_fit(const StackedData& data, const PanelGrouping& grouping);

// d x d covariance of the columns of x with a T-1 denominator.
MatrixXd sample_covariance(const MatrixXd& x, bool demean = true);

// Trace-preserving linear shrinkage towards the mean eigenvalue when m > t_eff.
MatrixXd shrink_covariance(const MatrixXd& sigma_hat, int t_eff);

struct Standardization {
    MatrixXd signals;  // transformed p x T
    VectorXd mean;     // p; intercept row reports 0
    VectorXd scale;    // p; intercept row reports 1
};

// Rows to mean 0 and sample std 1. With skip_intercept, row 0 passes through.
Standardization standardize_signals(const MatrixXd& s, bool skip_intercept = false);
MatrixXd apply_standardization(const Standardization& st, const MatrixXd& s);
MatrixXd invert_standardization(const Standardization& st, const MatrixXd& z);

struct Whitening {
    MatrixXd signals;    // transformed p x T
    VectorXd mean;       // p
    MatrixXd transform;  // p x p, signals = transform * (s - mean)
    int jitter_steps = 0;
};

// Centres and applies the inverse Cholesky factor of the sample covariance.
// With skip_intercept, row 0 passes through and the transform is identity there.
Whitening whiten_signals(const MatrixXd& s, bool skip_intercept = false);
MatrixXd apply_whitening(const Whitening& w, const MatrixXd& s);

// Diagonal of S' (S S')^{-1} S.
VectorXd hat_diagonal(const MatrixXd& signals);

// E[h_tt^2] for Gaussian signals; ones_mu is the sum of the signal means
// (0 for centred signals, 1 with an intercept row).
double expected_hat_sq(int p, int t, double ones_mu);

// Two aligned CSV files (date column then one column per asset / signal).
// Dates must match row by row.
StackedData load_stacked_csv(const std::string& returns_path, const std::string& signals_path);

}  // namespace overfit
