#include "overfit/model.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "overfit/error.hpp"

namespace overfit {

namespace {

struct EigRange {
    double min = 0.0;
    double max = 0.0;
};

EigRange eig_range(const MatrixXd& a) {
    if (a.size() == 0) return {};
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

void add(ValidationReport& report, std::string name, bool passed, std::string message) {
    if (!passed) report.ok = false;
    report.checks.push_back({std::move(name), passed, passed ? std::string{} : std::move(message)});
}

}  // namespace

std::string to_string(WeightRule::Kind kind) {
    switch (kind) {
        case WeightRule::Kind::Precision: return "precision";
        case WeightRule::Kind::DiagInverse: return "diag_inverse";
        case WeightRule::Kind::Identity: return "identity";
        case WeightRule::Kind::Custom: return "custom";
    }
    return "unknown";
}

WeightRule::Kind weight_kind_from_string(const std::string& name) {
    if (name == "precision") return WeightRule::Kind::Precision;
    if (name == "diag_inverse") return WeightRule::Kind::DiagInverse;
    if (name == "identity") return WeightRule::Kind::Identity;
    if (name == "custom") return WeightRule::Kind::Custom;
    throw ValidationError("unknown weight rule '" + name + "'");
}

ModelSpec make_standard_spec(const MatrixXd& beta, const MatrixXd& sigma_eps, WeightRule rule) {
    ModelSpec spec;
    spec.beta = beta;
    spec.mu_s = VectorXd::Zero(beta.cols());
    spec.sigma_s = MatrixXd::Identity(beta.cols(), beta.cols());
    spec.sigma_eps = sigma_eps;
    spec.weight_rule = std::move(rule);
    return spec;
}

ModelSpec make_intercept_spec(const MatrixXd& beta, const MatrixXd& sigma_eps,
                              const MatrixXd& dynamic_sigma_s, WeightRule rule) {
    const Eigen::Index p = beta.cols();
    if (dynamic_sigma_s.rows() != p - 1 || dynamic_sigma_s.cols() != p - 1) {
        throw ValidationError("dynamic signal covariance must be (p-1)x(p-1)");
    }
    ModelSpec spec;
    spec.beta = beta;
    spec.mu_s = VectorXd::Zero(p);
    spec.mu_s(0) = 1.0;
    spec.sigma_s = MatrixXd::Zero(p, p);
    spec.sigma_s.bottomRightCorner(p - 1, p - 1) = dynamic_sigma_s;
    spec.sigma_eps = sigma_eps;
    spec.weight_rule = std::move(rule);
    spec.has_intercept = true;
    return spec;
}

void check_window(const BacktestWindow& window, Eigen::Index p) {
    if (window.t1 <= p + 1) {
        throw ValidationError("degenerate window: t1=" + std::to_string(window.t1) +
                              " must exceed p+1=" + std::to_string(p + 1));
    }
    if (window.t2 < 1) throw ValidationError("degenerate window: t2 must be >= 1");
}

std::string ValidationReport::first_failure() const {
    for (const auto& c : checks) {
        if (!c.passed) return c.name + ": " + c.message;
    }
    return {};
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

bool is_symmetric(const MatrixXd& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_positive_definite(const MatrixXd& a) {
    if (a.size() == 0) return false;
    const EigRange r = eig_range(a);
    return r.max > 0.0 && r.min > kPdRelTol * r.max;
}

ValidationReport validate_model(const ModelSpec& spec) {
    ValidationReport report;
    const Eigen::Index m = spec.m();
    const Eigen::Index p = spec.p();

    const bool dims_ok = m >= 1 && p >= 1 && spec.mu_s.size() == p && spec.sigma_s.rows() == p &&
                         spec.sigma_s.cols() == p && spec.sigma_eps.rows() == m &&
                         spec.sigma_eps.cols() == m;
    {
        std::ostringstream msg;
        msg << "inconsistent dimensions: beta " << m << "x" << p << ", mu_s " << spec.mu_s.size()
            << ", sigma_s " << spec.sigma_s.rows() << "x" << spec.sigma_s.cols() << ", sigma_eps "
            << spec.sigma_eps.rows() << "x" << spec.sigma_eps.cols();
        add(report, "dimensions", dims_ok, msg.str());
    }
    if (!dims_ok) return report;

    if (!spec.beta.allFinite() || !spec.sigma_s.allFinite() || !spec.sigma_eps.allFinite() ||
        !spec.mu_s.allFinite()) {
        add(report, "finite", false, "non-finite entries");
        return report;
    }

    add(report, "sigma_s symmetric", is_symmetric(spec.sigma_s), "signal covariance not symmetric");
    const EigRange s_range = eig_range(spec.sigma_s);
    report.sigma_s_min_eig = s_range.min;
    report.sigma_s_max_eig = s_range.max;
    add(report, "sigma_s psd", s_range.min >= -kPdRelTol * std::max(1.0, s_range.max),
        "signal covariance not positive semidefinite (min eigenvalue " +
            std::to_string(s_range.min) + ")");

    add(report, "sigma_eps symmetric", is_symmetric(spec.sigma_eps),
        "residual covariance not symmetric");
    const EigRange e_range = eig_range(spec.sigma_eps);
    report.sigma_eps_min_eig = e_range.min;
    report.sigma_eps_max_eig = e_range.max;
    add(report, "sigma_eps pd", e_range.max > 0.0 && e_range.min > kPdRelTol * e_range.max,
        "residual covariance not positive definite (min eigenvalue " +
            std::to_string(e_range.min) + ")");

    if (spec.weight_rule.kind == WeightRule::Kind::Custom) {
        const MatrixXd& z = spec.weight_rule.custom;
        const bool shape_ok = z.rows() == m && z.cols() == m;
        add(report, "custom Z shape", shape_ok, "custom weight matrix must be m x m");
        if (shape_ok) add(report, "custom Z symmetric", is_symmetric(z), "custom weight matrix not symmetric");
    }

    if (spec.has_intercept) {
        add(report, "intercept mean", spec.mu_s(0) == 1.0, "intercept mean must be 1");
        const bool rest_zero = p == 1 || spec.mu_s.tail(p - 1).cwiseAbs().maxCoeff() == 0.0;
        add(report, "centred signals", rest_zero, "non-intercept signal means must be 0");
        const bool row_zero = spec.sigma_s.row(0).cwiseAbs().maxCoeff() == 0.0 &&
                              spec.sigma_s.col(0).cwiseAbs().maxCoeff() == 0.0;
        add(report, "intercept variance", row_zero,
            "intercept row/column of signal covariance must be zero");
    } else {
        add(report, "centred signals", spec.mu_s.cwiseAbs().maxCoeff() == 0.0,
            "signal means must be 0 without an intercept");
    }
    return report;
}

void require_valid(const ModelSpec& spec) {
    const ValidationReport report = validate_model(spec);
    if (!report.ok) throw ValidationError(report.first_failure());
}

MatrixXd weight_matrix(const ModelSpec& spec) {
    const Eigen::Index m = spec.m();
    switch (spec.weight_rule.kind) {
        case WeightRule::Kind::Precision: {
            Eigen::LLT<MatrixXd> llt(spec.sigma_eps);
            if (llt.info() != Eigen::Success || !is_positive_definite(spec.sigma_eps)) {
                throw NumericalError("residual covariance not invertible");
            }
            return symmetrize(llt.solve(MatrixXd::Identity(m, m)));
        }
        case WeightRule::Kind::DiagInverse: {
            const VectorXd d = spec.sigma_eps.diagonal();
            if ((d.array() <= 0.0).any()) throw NumericalError("residual variance not positive");
            return d.cwiseInverse().asDiagonal();
        }
        case WeightRule::Kind::Identity: return MatrixXd::Identity(m, m);
        case WeightRule::Kind::Custom: return spec.weight_rule.custom;
    }
    return MatrixXd::Identity(m, m);
}

DerivedMatrices derive_matrices(const ModelSpec& spec) {
    const MatrixXd z = weight_matrix(spec);
    Eigen::LLT<MatrixXd> llt(spec.sigma_eps);
    if (llt.info() != Eigen::Success) throw NumericalError("residual covariance not invertible");

    const MatrixXd z_beta = z * spec.beta;
    DerivedMatrices out;
    out.g = symmetrize(spec.beta.transpose() * z_beta);
    out.f = symmetrize(z_beta.transpose() * spec.sigma_eps * z_beta);
    out.gamma = symmetrize(spec.beta.transpose() * llt.solve(spec.beta));
    return out;
}

}  // namespace overfit
