#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "overfit/error.hpp"
#include "overfit/estimation.hpp"

namespace overfit {
namespace {

MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n01(rng);
    return a;
}

StackedData simulate(const MatrixXd& beta, int t, std::mt19937_64& rng, double noise = 1.0) {
    StackedData d;
    d.signals = gaussian(beta.cols(), t, rng);
    d.returns = beta * d.signals + noise * gaussian(beta.rows(), t, rng);
    return d;
}

TEST(Ols, NoiselessRecovery) {
    std::mt19937_64 rng(1);
    const MatrixXd beta = gaussian(3, 4, rng);
    const StackedData d = simulate(beta, 50, rng, 0.0);
    const FitResult fit = ols_fit(d);
    EXPECT_LE((fit.beta_hat - beta).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(fit.residuals.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ols, TooFewObservations) {
    std::mt19937_64 rng(2);
    const StackedData d = simulate(MatrixXd::Ones(1, 5), 4, rng);
    EXPECT_THROW(ols_fit(d), ValidationError);
}

TEST(Ols, CollinearRowsNamed) {
    std::mt19937_64 rng(3);
    StackedData d = simulate(MatrixXd::Ones(2, 3), 40, rng);
    d.signals.row(2) = 2.0 * d.signals.row(0);
    try {
        (void)ols_fit(d);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("collinear"), std::string::npos);
        EXPECT_TRUE(msg.find('0') != std::string::npos || msg.find('2') != std::string::npos) << msg;
    }
}

TEST(Ols, ConsistentAtLargeT) {
    std::mt19937_64 rng(4);
    MatrixXd beta(2, 2);
    beta << 0.3, -0.2, 0.1, 0.5;
    const StackedData d = simulate(beta, 100000, rng);
    EXPECT_LT((ols_fit(d).beta_hat - beta).norm(), 0.05);
}

// beta_hat - beta = E S' (S S')^{-1} with E the true noise.
TEST(Ols, DecompositionIdentity) {
    std::mt19937_64 rng(5);
    const MatrixXd beta = gaussian(3, 2, rng);
    StackedData d;
    d.signals = gaussian(2, 60, rng);
    const MatrixXd e = gaussian(3, 60, rng);
    d.returns = beta * d.signals + e;
    const MatrixXd s = d.signals;
    const MatrixXd expected = e * s.transpose() * (s * s.transpose()).inverse();
    EXPECT_LE((ols_fit(d).beta_hat - beta - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, ZeroPenaltyIsOls) {
    std::mt19937_64 rng(6);
    const StackedData d = simulate(gaussian(2, 3, rng), 30, rng);
    EXPECT_EQ(ridge_fit(d, 0.0).beta_hat, ols_fit(d).beta_hat);
}

TEST(Ridge, HugePenaltyShrinksToZero) {
    std::mt19937_64 rng(7);
    const StackedData d = simulate(gaussian(2, 3, rng), 30, rng);
    EXPECT_LT(ridge_fit(d, 1e12).beta_hat.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(ridge_fit(d, -1.0), ValidationError);
}

TEST(Ridge, SmallerNormThanOls) {
    std::mt19937_64 rng(8);
    const MatrixXd beta = 0.05 * gaussian(12, 37, rng);
    const StackedData d = simulate(beta, 2520, rng);
    EXPECT_LT(ridge_fit(d, 0.1).beta_hat.norm(), ols_fit(d).beta_hat.norm());
}

// Ridge solution against the augmented least-squares formulation.
TEST(Ridge, MatchesAugmentedLeastSquares) {
    std::mt19937_64 rng(9);
    const StackedData d = simulate(gaussian(2, 3, rng), 25, rng);
    const double gamma = 0.3;
    StackedData aug;
    aug.signals.resize(3, 25 + 3);
    aug.signals << d.signals, std::sqrt(gamma * 25) * MatrixXd::Identity(3, 3);
    aug.returns.resize(2, 25 + 3);
    aug.returns << d.returns, MatrixXd::Zero(2, 3);
    EXPECT_LE((ridge_fit(d, gamma).beta_hat - ols_fit(aug).beta_hat).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Panel, SingletonGroupsEqualOls) {
    std::mt19937_64 rng(10);
    const StackedData d = simulate(gaussian(3, 4, rng), 40, rng);
    const FitResult a = panel_fit(d, singleton_grouping(3, 4));
    EXPECT_LE((a.beta_hat - ols_fit(d).beta_hat).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Panel, SharedRowsEqualAndMoreAccurate) {
    std::mt19937_64 rng(11);
    const VectorXd row = (VectorXd(3) << 0.2, -0.1, 0.3).finished();
    MatrixXd beta(2, 3);
    beta.row(0) = row.transpose();
    beta.row(1) = row.transpose();
    double err_panel = 0.0;
    double err_ols = 0.0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        const StackedData d = simulate(beta, 12, rng);
        const MatrixXd bp = panel_fit(d, shared_signal_grouping(2, 3)).beta_hat;
        ASSERT_LE((bp.row(0) - bp.row(1)).cwiseAbs().maxCoeff(), 1e-14);
        err_panel += (bp.row(0) - row.transpose()).squaredNorm();
        err_ols += (ols_fit(d).beta_hat.row(0) - row.transpose()).squaredNorm();
    }
    EXPECT_LT(err_panel, err_ols);
}

TEST(Panel, FuturesGroupingCounts) {
    const PanelGrouping g = own_signal_family_grouping(12, 3, true);
    EXPECT_EQ(g.group_of.rows(), 12);
    EXPECT_EQ(g.group_of.cols(), 37);
    EXPECT_EQ(g.n_groups, 15);
    int dynamic_free = 0;
    for (Eigen::Index i = 0; i < 12; ++i) {
        for (Eigen::Index j = 1; j < 37; ++j) dynamic_free += g.group_of(i, j) >= 0 ? 1 : 0;
    }
    // 432 dynamic loadings of the full model collapse onto 3 shared coefficients.
    EXPECT_EQ(12 * 36, 432);
    EXPECT_EQ(dynamic_free, 36);
    EXPECT_EQ(g.group_of.rightCols(36).maxCoeff(), 2);
}

TEST(Panel, RankDeficientDesignRejected) {
    std::mt19937_64 rng(12);
    StackedData d = simulate(MatrixXd::Ones(2, 2), 20, rng);
    d.signals.row(1) = d.signals.row(0);
    EXPECT_THROW(panel_fit(d, shared_signal_grouping(2, 2)), NumericalError);
    PanelGrouping bad = shared_signal_grouping(2, 2);
    bad.group_of(0, 0) = 7;
    EXPECT_THROW(panel_fit(d, bad), ValidationError);
}

TEST(SampleCovariance, HandValues) {
    const MatrixXd constant = MatrixXd::Constant(2, 5, 3.0);
    EXPECT_EQ(sample_covariance(constant, true).cwiseAbs().maxCoeff(), 0.0);
    MatrixXd x(1, 2);
    x << 1.0, -1.0;
    EXPECT_DOUBLE_EQ(sample_covariance(x, true)(0, 0), 2.0);
    EXPECT_THROW(sample_covariance(MatrixXd::Ones(2, 1), true), ValidationError);
}

TEST(SampleCovariance, ConvergesToTruth) {
    std::mt19937_64 rng(13);
    MatrixXd sigma(2, 2);
    sigma << 2.0, 0.6, 0.6, 1.0;
    const MatrixXd l = sigma.llt().matrixL();
    const int t = 100000;
    const MatrixXd x = l * gaussian(2, t, rng);
    EXPECT_LT((sample_covariance(x, true) - sigma).norm(), 5.0 * sigma.norm() / std::sqrt(t));
}

TEST(Shrinkage, IdentityWhenEnoughData) {
    std::mt19937_64 rng(14);
    const MatrixXd s = sample_covariance(gaussian(4, 30, rng), true);
    EXPECT_EQ(shrink_covariance(s, 10), s);
}

TEST(Shrinkage, PreservesTraceAndLiftsSpectrum) {
    std::mt19937_64 rng(15);
    const MatrixXd s = sample_covariance(gaussian(5, 4, rng), true);  // rank 3
    const MatrixXd out = shrink_covariance(s, 3);
    EXPECT_NEAR(out.trace(), s.trace(), 1e-14 * s.trace());
    const double q = 5.0 / 3.0;
    const double floor = (1.0 - 1.0 / q) * s.trace() / 5.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out);
    EXPECT_GE(eig.eigenvalues().minCoeff(), floor * (1.0 - 1e-12));
    EXPECT_GT(floor, 0.0);
}

TEST(Shrinkage, RejectsAsymmetric) {
    MatrixXd a(2, 2);
    a << 1.0, 0.5, 0.0, 1.0;
    EXPECT_THROW(shrink_covariance(a, 1), ValidationError);
}

TEST(Standardize, HandValuesAndRoundTrip) {
    MatrixXd s(1, 2);
    s << 0.0, 2.0;
    const Standardization st = standardize_signals(s);
    EXPECT_NEAR(st.signals(0, 0), -1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(st.signals(0, 1), 1.0 / std::sqrt(2.0), 1e-15);

    std::mt19937_64 rng(16);
    const MatrixXd x = (gaussian(4, 50, rng).array() * 3.0 + 1.5).matrix();
    const Standardization sx = standardize_signals(x);
    for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(sx.signals.row(i).mean(), 0.0, 1e-12);
        EXPECT_NEAR(standardize_signals(sx.signals).scale(i), 1.0, 1e-12);
    }
    EXPECT_LE((invert_standardization(sx, sx.signals) - x).cwiseAbs().maxCoeff(), 1e-12);
    const Standardization again = standardize_signals(sx.signals);
    EXPECT_LE((again.signals - sx.signals).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardize, ZeroVarianceRowNamed) {
    MatrixXd s(2, 3);
    s << 1.0, 2.0, 3.0, 4.0, 4.0, 4.0;
    try {
        (void)standardize_signals(s);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
}

TEST(Standardize, InterceptRowUntouched) {
    std::mt19937_64 rng(17);
    MatrixXd s = gaussian(3, 20, rng);
    s.row(0).setOnes();
    const Standardization st = standardize_signals(s, true);
    EXPECT_TRUE((st.signals.row(0).array() == 1.0).all());
}

TEST(Whiten, CorrelatedInputBecomesWhite) {
    std::mt19937_64 rng(18);
    MatrixXd mix(3, 3);
    mix << 1.0, 0.0, 0.0, 0.8, 0.6, 0.0, 0.5, 0.5, 0.7;
    const MatrixXd s = mix * gaussian(3, 500, rng);
    const Whitening w = whiten_signals(s);
    EXPECT_LT((sample_covariance(w.signals, true) - MatrixXd::Identity(3, 3)).norm(), 1e-8);
    EXPECT_LE((apply_whitening(w, s) - w.signals).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Whiten, WhiteInputGivesIdentityTransform) {
    std::mt19937_64 rng(19);
    const MatrixXd s = whiten_signals(gaussian(3, 200, rng)).signals;
    const Whitening w = whiten_signals(s);
    EXPECT_LT((w.transform - MatrixXd::Identity(3, 3)).norm(), 1e-10);
}

TEST(Whiten, DuplicateRowsRejected) {
    std::mt19937_64 rng(20);
    MatrixXd s = gaussian(3, 100, rng);
    s.row(2) = s.row(1);
    EXPECT_THROW(whiten_signals(s), NumericalError);
}

TEST(Whiten, InterceptPassesThrough) {
    std::mt19937_64 rng(21);
    MatrixXd s = gaussian(3, 100, rng);
    s.row(0).setOnes();
    const Whitening w = whiten_signals(s, true);
    EXPECT_TRUE((w.signals.row(0).array() == 1.0).all());
    EXPECT_LT((sample_covariance(w.signals.bottomRows(2), true) - MatrixXd::Identity(2, 2)).norm(), 1e-8);
}

TEST(HatMatrix, TraceEqualsRank) {
    std::mt19937_64 rng(22);
    const MatrixXd s = gaussian(4, 30, rng);
    EXPECT_NEAR(hat_diagonal(s).sum(), 4.0, 1e-10);
}

TEST(HatMatrix, CentredMomentsMatchBetaDistribution) {
    std::mt19937_64 rng(23);
    const int p = 3;
    const int t = 40;
    const int reps = 20000;
    std::vector<double> h1(reps), h2(reps);
    for (int r = 0; r < reps; ++r) {
        const double h = hat_diagonal(gaussian(p, t, rng))(0);
        h1[r] = h;
        h2[r] = h * h;
    }
    auto mean_se = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x / v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / (v.size() - 1.0) / v.size())};
    };
    const auto [m1, se1] = mean_se(h1);
    const auto [m2, se2] = mean_se(h2);
    EXPECT_NEAR(m1, static_cast<double>(p) / t, 4.0 * se1);
    EXPECT_NEAR(m2, expected_hat_sq(p, t, 0.0), 4.0 * se2);
}

TEST(HatMatrix, InterceptMomentMatchesShiftedBeta) {
    // h = 1/T + (1 - 1/T) B with B ~ Beta((p-1)/2, (T-p)/2).
    for (int p : {2, 5, 10}) {
        for (int t : {30, 100, 252}) {
            const double a = (p - 1) / 2.0;
            const double b = (t - p) / 2.0;
            const double eb = a / (a + b);
            const double eb2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0));
            const double c = 1.0 / t;
            const double exact = c * c + 2.0 * c * (1.0 - c) * eb + (1.0 - c) * (1.0 - c) * eb2;
            EXPECT_NEAR(expected_hat_sq(p, t, 1.0), exact, 1e-14) << p << " " << t;
        }
    }
}

class CsvFiles : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("overfit_est_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::string write(const std::string& name, const std::string& body) {
        const auto path = dir_ / name;
        std::ofstream(path) << body;
        return path.string();
    }
    std::filesystem::path dir_;
};

TEST_F(CsvFiles, LoadsAlignedFiles) {
    const std::string r = write("r.csv", "date,a,b\n2020-01,0.1,0.2\n2020-02,-0.1,0.0\n2020-03,0.3,0.1\n");
    const std::string s = write("s.csv", "date,x\n2020-01,1\n2020-02,2\n2020-03,3\n");
    const StackedData d = load_stacked_csv(r, s);
    EXPECT_EQ(d.returns.rows(), 2);
    EXPECT_EQ(d.signals.rows(), 1);
    EXPECT_EQ(d.signals.cols(), 3);
    EXPECT_DOUBLE_EQ(d.returns(1, 2), 0.1);
    EXPECT_EQ(d.dates[1], "2020-02");
}

TEST_F(CsvFiles, DateMismatchReported) {
    const std::string r = write("r.csv", "date,a\n2020-01,0.1\n2020-02,0.2\n");
    const std::string s = write("s.csv", "date,x\n2020-01,1\n2020-03,2\n");
    try {
        (void)load_stacked_csv(r, s);
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos);
        EXPECT_NE(msg.find("2020-03"), std::string::npos);
    }
}

TEST_F(CsvFiles, MissingFileNamed) {
    try {
        (void)load_stacked_csv((dir_ / "nope.csv").string(), (dir_ / "nope.csv").string());
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("nope.csv"), std::string::npos);
    }
}

}  // namespace
}  // namespace overfit
