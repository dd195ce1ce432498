#include "overfit/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "overfit/csv.hpp"
#include "overfit/error.hpp"
#include "overfit/model.hpp"

namespace overfit {

namespace {

constexpr double kRcondFloor = 1e-13;
constexpr double kSingularRelEig = 1e-13;
constexpr double kJitterBase = 1e-12;
constexpr int kJitterAttempts = 3;

std::string join_indices(const std::vector<Eigen::Index>& idx) {
    std::ostringstream out;
    for (std::size_t i = 0; i < idx.size(); ++i) out << (i ? ", " : "") << idx[i];
    return out.str();
}

[[noreturn]] void throw_collinear(const MatrixXd& gram) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(gram);
    qr.setThreshold(1e-10);
    std::vector<Eigen::Index> dependent;
    for (Eigen::Index k = qr.rank(); k < gram.cols(); ++k) {
        dependent.push_back(qr.colsPermutation().indices()(k));
    }
    std::sort(dependent.begin(), dependent.end());
    throw NumericalError("singular Gram matrix: signal rows {" + join_indices(dependent) +
                         "} are collinear with the remaining signals");
}

// rhs * gram^{-1} for a symmetric positive definite gram.
MatrixXd right_solve(const MatrixXd& gram, const MatrixXd& rhs) {
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kRcondFloor)) throw_collinear(gram);
    return llt.solve(rhs.transpose()).transpose();
}

void require_columns(const StackedData& data) {
    check_stacked(data);
    if (data.signals.cols() < data.signals.rows()) {
        throw ValidationError("fewer observations (" + std::to_string(data.signals.cols()) +
                              ") than signals (" + std::to_string(data.signals.rows()) + ")");
    }
}

FitResult finish(const StackedData& data, MatrixXd beta_hat) {
    FitResult out;
    out.residuals = data.returns - beta_hat * data.signals;
    out.beta_hat = std::move(beta_hat);
    return out;
}

}  // namespace

void check_stacked(const StackedData& data, bool intercept) {
    if (data.returns.cols() != data.signals.cols()) {
        throw ValidationError("returns have " + std::to_string(data.returns.cols()) +
                              " columns but signals have " + std::to_string(data.signals.cols()));
    }
    if (!data.dates.empty() && static_cast<Eigen::Index>(data.dates.size()) != data.signals.cols()) {
        throw ValidationError("date count does not match the number of observations");
    }
    if (intercept && (data.signals.rows() == 0 || (data.signals.row(0).array() != 1.0).any())) {
        throw ValidationError("intercept row must be identically 1");
    }
}

FitResult ols_fit(const StackedData& data) {
    require_columns(data);
    const MatrixXd& s = data.signals;
    return finish(data, right_solve(s * s.transpose(), data.returns * s.transpose()));
}

FitResult ridge_fit(const StackedData& data, double gamma) {
    if (!(gamma >= 0.0)) throw ValidationError("ridge gamma must be >= 0");
    if (gamma == 0.0) return ols_fit(data);
    check_stacked(data);
    const MatrixXd& s = data.signals;
    MatrixXd gram = s * s.transpose();
    gram.diagonal().array() += gamma * static_cast<double>(s.cols());
    return finish(data, right_solve(gram, data.returns * s.transpose()));
}

PanelGrouping singleton_grouping(Eigen::Index m, Eigen::Index p) {
    PanelGrouping g;
    g.group_of.resize(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) g.group_of(i, j) = static_cast<int>(i * p + j);
    }
    g.n_groups = static_cast<int>(m * p);
    return g;
}

PanelGrouping shared_signal_grouping(Eigen::Index m, Eigen::Index p) {
    PanelGrouping g;
    g.group_of.resize(m, p);
    for (Eigen::Index j = 0; j < p; ++j) g.group_of.col(j).setConstant(static_cast<int>(j));
    g.n_groups = static_cast<int>(p);
    return g;
}

PanelGrouping own_signal_family_grouping(Eigen::Index m, int n_families, bool intercept) {
    if (m < 1 || n_families < 1) throw ValidationError("need at least one asset and one family");
    const Eigen::Index offset = intercept ? 1 : 0;
    PanelGrouping g;
    g.group_of = Eigen::MatrixXi::Constant(m, offset + n_families * m, PanelGrouping::kFixedZero);
    for (int f = 0; f < n_families; ++f) {
        for (Eigen::Index i = 0; i < m; ++i) g.group_of(i, offset + f * m + i) = f;
    }
    g.n_groups = n_families;
    if (intercept) {
        for (Eigen::Index i = 0; i < m; ++i) g.group_of(i, 0) = n_families + static_cast<int>(i);
        g.n_groups += static_cast<int>(m);
    }
    return g;
}

FitResult panel_fit(const StackedData& data, const PanelGrouping& grouping) {
    check_stacked(data);
    const Eigen::Index m = data.returns.rows();
    const Eigen::Index p = data.signals.rows();
    if (grouping.group_of.rows() != m || grouping.group_of.cols() != p) {
        throw ValidationError("panel grouping must be m x p");
    }
    const int n = grouping.n_groups;
    if (n < 1) throw ValidationError("panel grouping has no free coefficients");
    if ((grouping.group_of.array() < PanelGrouping::kFixedZero).any() ||
        (grouping.group_of.array() >= n).any()) {
        throw ValidationError("panel group index out of range");
    }

    const MatrixXd gram = data.signals * data.signals.transpose();
    const MatrixXd cross = data.returns * data.signals.transpose();
    MatrixXd a = MatrixXd::Zero(n, n);
    VectorXd b = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const int gj = grouping.group_of(i, j);
            if (gj < 0) continue;
            b(gj) += cross(i, j);
            for (Eigen::Index k = 0; k < p; ++k) {
                const int gk = grouping.group_of(i, k);
                if (gk >= 0) a(gj, gk) += gram(j, k);
            }
        }
    }

    Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    qr.setThreshold(1e-12);
    if (qr.rank() < n) {
        throw NumericalError("rank-deficient grouped design: rank " + std::to_string(qr.rank()) +
                             " of " + std::to_string(n) + " groups");
    }
    const VectorXd theta = qr.solve(b);

    MatrixXd beta_hat = MatrixXd::Zero(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const int g = grouping.group_of(i, j);
            if (g >= 0) beta_hat(i, j) = theta(g);
        }
    }
    return finish(data, std::move(beta_hat));
}

MatrixXd sample_covariance(const MatrixXd& x, bool demean) {
    if (x.cols() < 2) throw ValidationError("sample covariance needs at least 2 observations");
    MatrixXd c = x;
    if (demean) c.colwise() -= x.rowwise().mean();
    return symmetrize(c * c.transpose() / static_cast<double>(x.cols() - 1));
}

MatrixXd shrink_covariance(const MatrixXd& sigma_hat, int t_eff) {
    if (sigma_hat.rows() != sigma_hat.cols()) throw ValidationError("covariance must be square");
    if (!is_symmetric(sigma_hat)) throw ValidationError("covariance must be symmetric");
    if (t_eff < 1) throw ValidationError("effective sample size must be positive");
    const double m = static_cast<double>(sigma_hat.rows());
    const double q = m / t_eff;
    if (q <= 1.0) return sigma_hat;
    const double alpha = 1.0 / q;
    const double mean_eig = sigma_hat.trace() / m;
    MatrixXd out = alpha * sigma_hat;
    out.diagonal().array() += (1.0 - alpha) * mean_eig;
    return out;
}

Standardization standardize_signals(const MatrixXd& s, bool skip_intercept) {
    if (s.cols() < 2) throw ValidationError("standardization needs at least 2 observations");
    Standardization st;
    st.mean = VectorXd::Zero(s.rows());
    st.scale = VectorXd::Ones(s.rows());
    const Eigen::Index first = skip_intercept ? 1 : 0;
    for (Eigen::Index i = first; i < s.rows(); ++i) {
        const double mean = s.row(i).mean();
        const double var = (s.row(i).array() - mean).square().sum() / static_cast<double>(s.cols() - 1);
        if (!(var > 0.0)) throw ValidationError("signal row " + std::to_string(i) + " has zero variance");
        st.mean(i) = mean;
        st.scale(i) = std::sqrt(var);
    }
    st.signals = apply_standardization(st, s);
    return st;
}

MatrixXd apply_standardization(const Standardization& st, const MatrixXd& s) {
    if (s.rows() != st.mean.size()) throw ValidationError("standardization dimension mismatch");
    return ((s.colwise() - st.mean).array().colwise() / st.scale.array()).matrix();
}

MatrixXd invert_standardization(const Standardization& st, const MatrixXd& z) {
    if (z.rows() != st.mean.size()) throw ValidationError("standardization dimension mismatch");
    return (z.array().colwise() * st.scale.array()).matrix().colwise() + st.mean;
}

Whitening whiten_signals(const MatrixXd& s, bool skip_intercept) {
    const Eigen::Index p = s.rows();
    const Eigen::Index first = skip_intercept ? 1 : 0;
    const Eigen::Index k = p - first;
    Whitening w;
    w.mean = VectorXd::Zero(p);
    w.transform = MatrixXd::Identity(p, p);
    if (k == 0) {
        w.signals = s;
        return w;
    }
    const MatrixXd dyn = s.bottomRows(k);
    w.mean.tail(k) = dyn.rowwise().mean();
    const MatrixXd cov = sample_covariance(dyn, true);

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double max_eig = eig.eigenvalues().maxCoeff();
    if (!(max_eig > 0.0) || eig.eigenvalues().minCoeff() <= kSingularRelEig * max_eig) {
        throw NumericalError("singular signal covariance: remove redundant or collinear signals");
    }

    MatrixXd jittered = cov;
    const double jitter0 = kJitterBase * cov.trace() / static_cast<double>(k);
    Eigen::LLT<MatrixXd> llt(jittered);
    double jitter = jitter0;
    while (llt.info() != Eigen::Success) {
        if (w.jitter_steps == kJitterAttempts) {
            throw NumericalError("Cholesky of signal covariance failed; remove collinear signals");
        }
        jittered = cov;
        jittered.diagonal().array() += jitter;
        llt.compute(jittered);
        jitter *= 10.0;
        ++w.jitter_steps;
    }
    const MatrixXd l = llt.matrixL();
    w.transform.bottomRightCorner(k, k) =
        l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(k, k));
    w.signals = apply_whitening(w, s);
    return w;
}

MatrixXd apply_whitening(const Whitening& w, const MatrixXd& s) {
    if (s.rows() != w.mean.size()) throw ValidationError("whitening dimension mismatch");
    return w.transform * (s.colwise() - w.mean);
}

VectorXd hat_diagonal(const MatrixXd& signals) {
    const MatrixXd gram = signals * signals.transpose();
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > kRcondFloor)) throw_collinear(gram);
    const MatrixXd x = llt.solve(signals);
    return signals.cwiseProduct(x).colwise().sum().transpose();
}

double expected_hat_sq(int p, int t, double ones_mu) {
    if (p < 1 || t <= p) throw ValidationError("expected_hat_sq requires 1 <= p < t");
    const double pd = p;
    const double td = t;
    return pd * (pd + 2.0) / (td * (td + 2.0)) -
           ones_mu * 2.0 * (td - pd) * (td - pd + 2.0) / (td * td * (td + 1.0) * (td + 2.0));
}

StackedData load_stacked_csv(const std::string& returns_path, const std::string& signals_path) {
    const CsvTable r = read_csv(returns_path);
    const CsvTable s = read_csv(signals_path);
    if (r.header.size() < 2) throw ValidationError(returns_path + ": need a date column and at least one asset");
    if (s.header.size() < 2) throw ValidationError(signals_path + ": need a date column and at least one signal");
    if (r.rows.size() != s.rows.size()) {
        throw ValidationError("row count mismatch: " + std::to_string(r.rows.size()) + " returns vs " +
                              std::to_string(s.rows.size()) + " signals");
    }
    const Eigen::Index t = static_cast<Eigen::Index>(r.rows.size());
    StackedData data;
    data.returns.resize(static_cast<Eigen::Index>(r.header.size()) - 1, t);
    data.signals.resize(static_cast<Eigen::Index>(s.header.size()) - 1, t);
    data.dates.reserve(r.rows.size());
    for (Eigen::Index k = 0; k < t; ++k) {
        const auto& rr = r.rows[k];
        const auto& sr = s.rows[k];
        if (rr[0] != sr[0]) {
            throw ValidationError("date mismatch at row " + std::to_string(k + 1) + ": '" + rr[0] +
                                  "' vs '" + sr[0] + "'");
        }
        data.dates.push_back(rr[0]);
        auto fill = [&](const std::vector<std::string>& row, MatrixXd& dst, const std::string& path) {
            for (Eigen::Index j = 0; j < dst.rows(); ++j) {
                const std::string where = path + " row " + std::to_string(k + 1) + " column " +
                                          std::to_string(j + 2);
                const std::optional<double> v = parse_cell(row[j + 1], where);
                if (!v) throw ValidationError("missing value at " + where);
                dst(j, k) = *v;
            }
        };
        fill(rr, data.returns, returns_path);
        fill(sr, data.signals, signals_path);
    }
    return data;
}

}  // namespace overfit
