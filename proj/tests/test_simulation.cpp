#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>

#include "overfit/error.hpp"
#include "overfit/rng.hpp"
#include "overfit/simulation.hpp"

namespace overfit {
namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Mean of a serially correlated series with a batch-means standard error.
MeanSe batch_mean(const VectorXd& x, int batches) {
    const Eigen::Index len = x.size() / batches;
    VectorXd means(batches);
    for (int b = 0; b < batches; ++b) means(b) = x.segment(b * len, len).mean();
    const double mean = means.mean();
    const double var = (means.array() - mean).square().sum() / (batches - 1.0);
    return {mean, std::sqrt(var / batches)};
}

double excess_kurtosis(const VectorXd& x) {
    const VectorXd c = x.array() - x.mean();
    const double m2 = c.array().square().mean();
    const double m4 = c.array().square().square().mean();
    return m4 / (m2 * m2) - 3.0;
}

SimulationConfig iid_config(int n_paths, std::uint64_t seed) {
    SimulationConfig c;
    c.n_paths = n_paths;
    c.seed = seed;
    c.threads = 1;
    return c;
}

SimulationConfig ar1_config(double phi, std::uint64_t seed) {
    SimulationConfig c;
    c.signal_kind = SignalKind::AR1;
    c.phi = MatrixXd::Constant(1, 1, phi);
    c.seed = seed;
    return c;
}

TEST(StreamSeed, DistinctAcrossIndexAndTag) {
    EXPECT_NE(stream_seed(1, 0, StreamTag::Signals), stream_seed(1, 1, StreamTag::Signals));
    EXPECT_NE(stream_seed(1, 0, StreamTag::Signals), stream_seed(1, 0, StreamTag::Noise));
    EXPECT_NE(stream_seed(1, 0, StreamTag::Signals), stream_seed(2, 0, StreamTag::Signals));
    EXPECT_EQ(stream_seed(7, 3, StreamTag::Noise), stream_seed(7, 3, StreamTag::Noise));
}

TEST(SimulateSignals, GaussianCovarianceMatchesIdentity) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 3), MatrixXd::Identity(1, 1));
    const MatrixXd s = simulate_signals(spec, 1000000, iid_config(1, 11), 0);
    const MatrixXd cov = s * s.transpose() / static_cast<double>(s.cols());
    EXPECT_LT((cov - MatrixXd::Identity(3, 3)).norm(), 0.01);
}

TEST(SimulateSignals, CorrelatedGaussianCovariance) {
    MatrixXd sigma(2, 2);
    sigma << 2.0, 0.6, 0.6, 0.5;
    ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1));
    spec.sigma_s = sigma;
    const MatrixXd s = simulate_signals(spec, 400000, iid_config(1, 12), 0);
    const MatrixXd cov = s * s.transpose() / static_cast<double>(s.cols());
    EXPECT_LT((cov - sigma).norm(), 0.02);
}

TEST(SimulateSignals, InterceptRowHeldAtOne) {
    const ModelSpec spec =
        make_intercept_spec(MatrixXd::Zero(1, 3), MatrixXd::Identity(1, 1), MatrixXd::Identity(2, 2));
    SimulationConfig c = ar1_config(0.5, 3);
    c.phi = 0.5 * MatrixXd::Identity(2, 2);
    for (const SimulationConfig& cfg : {iid_config(1, 3), c}) {
        const MatrixXd s = simulate_signals(spec, 50, cfg, 0);
        EXPECT_TRUE((s.row(0).array() == 1.0).all());
        EXPECT_GT(s.bottomRows(2).cwiseAbs().sum(), 0.0);
    }
}

TEST(SimulateSignals, Ar1StationaryVariance) {
    const double phi = 0.9;
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1));
    SimulationConfig c = ar1_config(phi, 21);
    c.shock_cov = MatrixXd::Identity(1, 1);
    const MatrixXd s = simulate_signals(spec, 2000000, c, 0);
    const MeanSe sq = batch_mean(s.row(0).transpose().array().square(), 200);
    EXPECT_NEAR(sq.mean, 1.0 / (1.0 - phi * phi), 3.0 * sq.se);
    const double lag1 = (s.row(0).head(s.cols() - 1).array() * s.row(0).tail(s.cols() - 1).array()).mean();
    EXPECT_NEAR(lag1 / sq.mean, phi, 0.01);
}

TEST(SimulateSignals, Ar1DefaultShocksKeepSigmaS) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1));
    const MatrixXd s = simulate_signals(spec, 1000000, ar1_config(0.7, 22), 0);
    const MeanSe sq = batch_mean(s.row(0).transpose().array().square(), 100);
    EXPECT_NEAR(sq.mean, 1.0, 3.0 * sq.se);
}

TEST(SimulateSignals, PhiZeroMatchesIid) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1));
    const int t = 400000;
    const VectorXd a = simulate_signals(spec, t, ar1_config(0.0, 31), 0).row(0).transpose();
    const VectorXd b = simulate_signals(spec, t, iid_config(1, 32), 0).row(0).transpose();
    const double se_mean = std::sqrt(2.0 / t);
    EXPECT_NEAR(a.mean(), b.mean(), 3.0 * se_mean);
    const double se_var = std::sqrt(2.0 * 2.0 / t);
    EXPECT_NEAR(a.array().square().mean(), b.array().square().mean(), 3.0 * se_var);
    const double lag_a = (a.head(t - 1).array() * a.tail(t - 1).array()).mean();
    EXPECT_NEAR(lag_a, 0.0, 3.0 / std::sqrt(t));
}

TEST(SimulateSignals, StudentTShocksHaveUnitVariance) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1));
    SimulationConfig c = ar1_config(0.0, 41);
    c.signal_kind = SignalKind::AR1StudentT;
    c.signal_dof = VectorXd::Constant(1, 6.0);
    const MatrixXd s = simulate_signals(spec, 1000000, c, 0);
    const MeanSe sq = batch_mean(s.row(0).transpose().array().square(), 100);
    EXPECT_NEAR(sq.mean, 1.0, 3.0 * sq.se);
    EXPECT_GT(excess_kurtosis(s.row(0).transpose()), 1.5);
}

TEST(SimulateSignals, DeterministicPerPathIndex) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1));
    const SimulationConfig c = iid_config(1, 5);
    EXPECT_EQ(simulate_signals(spec, 20, c, 4), simulate_signals(spec, 20, c, 4));
    EXPECT_NE(simulate_signals(spec, 20, c, 4), simulate_signals(spec, 20, c, 5));
}

TEST(ValidateConfig, RejectsBadInputs) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(2, 1), MatrixXd::Identity(2, 2));
    SimulationConfig c = ar1_config(1.0, 0);
    EXPECT_THROW(validate_config(c, spec), ValidationError);
    c.phi(0, 0) = -1.2;
    EXPECT_THROW(validate_config(c, spec), ValidationError);
    c.phi(0, 0) = 0.5;
    EXPECT_NO_THROW(validate_config(c, spec));
    c.signal_kind = SignalKind::AR1StudentT;
    c.signal_dof = VectorXd::Constant(1, 2.0);
    EXPECT_THROW(validate_config(c, spec), ValidationError);
    c.signal_dof(0) = 4.0;
    EXPECT_NO_THROW(validate_config(c, spec));

    SimulationConfig n = iid_config(0, 0);
    EXPECT_THROW(validate_config(n, spec), ValidationError);
    n.n_paths = 1;
    n.noise_kind = NoiseKind::StudentT;
    n.noise_dof = VectorXd::Constant(3, 5.0);
    EXPECT_THROW(validate_config(n, spec), ValidationError);
    n.noise_dof = VectorXd::Constant(2, 5.0);
    EXPECT_NO_THROW(validate_config(n, spec));

    EXPECT_THROW(simulate_signals(spec, 10, ar1_config(1.5, 0), 0), ValidationError);
}

TEST(StationaryCovariance, ScalarAndMatrixFixedPoint) {
    EXPECT_NEAR(stationary_covariance(MatrixXd::Constant(1, 1, 0.9), MatrixXd::Identity(1, 1))(0, 0),
                1.0 / (1.0 - 0.81), 1e-12);
    MatrixXd phi(2, 2);
    phi << 0.5, 0.3, -0.2, 0.8;
    MatrixXd q(2, 2);
    q << 1.0, 0.2, 0.2, 0.5;
    const MatrixXd x = stationary_covariance(phi, q);
    EXPECT_LT((x - phi * x * phi.transpose() - q).norm(), 1e-12);
}

TEST(SimulateReturns, PureNoiseHasUnitVariance) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(3, 2), MatrixXd::Identity(3, 3));
    const SimulationConfig c = iid_config(1, 51);
    const MatrixXd s = simulate_signals(spec, 200000, c, 0);
    const MatrixXd r = simulate_returns(spec, s, c, 0);
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(r.row(i).array().square().mean(), 1.0, 3.0 * std::sqrt(2.0 / 200000));
    }
}

TEST(SimulateReturns, ZeroNoiseIsExact) {
    MatrixXd beta(2, 2);
    beta << 0.3, -0.1, 0.2, 0.4;
    const ModelSpec spec = make_standard_spec(beta, MatrixXd::Identity(2, 2));
    SimulationConfig c = iid_config(1, 52);
    c.noise_kind = NoiseKind::None;
    const MatrixXd s = simulate_signals(spec, 100, c, 0);
    EXPECT_EQ(simulate_returns(spec, s, c, 0), beta * s);
}

VectorXd student_t_noise(double dof, int n, std::uint64_t seed) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1));
    SimulationConfig c = iid_config(1, seed);
    c.noise_kind = NoiseKind::StudentT;
    c.noise_dof = VectorXd::Constant(1, dof);
    return simulate_returns(spec, MatrixXd::Zero(1, n), c, 0).row(0).transpose();
}

TEST(SimulateReturns, StudentTNoiseMatchesScaledDistribution) {
    const double dof = 5.0;
    const int n = 1000000;
    VectorXd r = student_t_noise(dof, n, 53);
    EXPECT_NEAR(r.array().square().mean(), 1.0, 0.01);
    std::sort(r.data(), r.data() + n);
    const boost::math::students_t dist(dof);
    const double scale = std::sqrt((dof - 2.0) / dof);
    double ks = 0.0;
    for (int i = 0; i < n; i += 97) {
        const double f = boost::math::cdf(dist, r(i) / scale);
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - (i + 1.0) / n)});
    }
    EXPECT_LT(ks, 1.63 / std::sqrt(static_cast<double>(n)));
    EXPECT_GT(excess_kurtosis(r), 3.0);
}

TEST(SimulateReturns, StudentTNoiseFourthMoment) {
    // Excess kurtosis 6 / (dof - 4); the eighth moment is finite for dof = 10.
    const VectorXd r = student_t_noise(10.0, 1000000, 54);
    const MeanSe m4 = batch_mean(r.array().square().square(), 200);
    EXPECT_NEAR(m4.mean, 3.0 + 6.0 / 6.0, 3.0 * m4.se);
}

TEST(SimulateReturns, CorrelatedNoiseCovariance) {
    MatrixXd sigma(2, 2);
    sigma << 1.0, -0.4, -0.4, 0.8;
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(2, 1), sigma);
    const MatrixXd r = simulate_returns(spec, MatrixXd::Zero(1, 400000), iid_config(1, 54), 0);
    EXPECT_LT((r * r.transpose() / 400000.0 - sigma).norm(), 0.015);
}

TEST(SampleStats, ConstantPnlHasUndefinedSharpe) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Ones(1, 1), MatrixXd::Identity(1, 1));
    const MatrixXd s = MatrixXd::Ones(1, 10);
    const MatrixXd r = spec.beta * s;
    const Backtest bt = run_backtest(spec.beta, MatrixXd::Identity(1, 1), s, r);
    EXPECT_TRUE((bt.pnl.array() == 1.0).all());
    EXPECT_DOUBLE_EQ(bt.stats.mean, 1.0);
    EXPECT_DOUBLE_EQ(bt.stats.variance, 0.0);
    EXPECT_FALSE(bt.stats.sharpe_defined);
    EXPECT_TRUE(std::isnan(bt.stats.sharpe));
}

TEST(SampleStats, AlternatingPnl) {
    VectorXd pnl(6);
    pnl << 1, -1, 1, -1, 1, -1;
    const SampleStats st = sample_stats(pnl);
    EXPECT_DOUBLE_EQ(st.mean, 0.0);
    EXPECT_DOUBLE_EQ(st.variance, 6.0 / 5.0);
    EXPECT_TRUE(st.sharpe_defined);
    EXPECT_DOUBLE_EQ(st.sharpe, 0.0);
    EXPECT_THROW(sample_stats(VectorXd::Ones(1)), ValidationError);
}

TEST(RunBacktest, MatchesNaiveLoop) {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> n01;
    const int m = 3, p = 2, t = 40;
    MatrixXd beta_hat(m, p), z(m, m), s(p, t), r(m, t);
    for (auto* x : {&beta_hat, &z, &s, &r}) {
        for (Eigen::Index i = 0; i < x->size(); ++i) x->data()[i] = n01(rng);
    }
    const Backtest bt = run_backtest(beta_hat, z, s, r);
    double sum = 0.0;
    std::vector<double> pnl(t);
    for (int k = 0; k < t; ++k) {
        double v = 0.0;
        for (int i = 0; i < m; ++i) {
            double w = 0.0;
            for (int j = 0; j < m; ++j) {
                for (int l = 0; l < p; ++l) w += z(i, j) * beta_hat(j, l) * s(l, k);
            }
            v += w * r(i, k);
        }
        pnl[k] = v;
        sum += v;
        EXPECT_NEAR(bt.pnl(k), v, 1e-12);
    }
    const double mean = sum / t;
    double ss = 0.0;
    for (double v : pnl) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(bt.stats.mean, mean, 1e-12);
    EXPECT_NEAR(bt.stats.variance, ss / (t - 1), 1e-12);
    EXPECT_NEAR(bt.stats.sharpe, mean / std::sqrt(ss / (t - 1)), 1e-12);
    EXPECT_THROW(run_backtest(beta_hat, z, s.leftCols(3), r), ValidationError);
}

TEST(MonteCarloExperiment, MatchesAnalyticMoments) {
    MatrixXd beta(2, 2);
    beta << 0.12, -0.05, 0.04, 0.09;
    MatrixXd sigma_eps(2, 2);
    sigma_eps << 1.0, 0.3, 0.3, 0.7;
    const ModelSpec spec = make_standard_spec(beta, sigma_eps);
    const BacktestWindow window{100, 20};
    const ExperimentResult r = monte_carlo_experiment(spec, window, iid_config(6000, 71));
    const MomentSummary& a = r.analytic.moments;
    EXPECT_EQ(r.failed_paths, 0);
    EXPECT_NEAR(r.is.mean.value, a.is_mean, 3.0 * r.is.mean.se);
    EXPECT_NEAR(r.oos.mean.value, a.oos_mean, 3.0 * r.oos.mean.se);
    EXPECT_NEAR(r.oos.variance.value, a.oos_var, 3.0 * r.oos.variance.se);
    EXPECT_NEAR(r.is.variance.value, a.is_var, 0.03 * a.is_var + 3.0 * r.is.variance.se);
    EXPECT_NEAR(r.mean_gap.value, 4.0 / 100.0, 3.0 * r.mean_gap.se);
}

TEST(MonteCarloExperiment, InterceptAndEstimatedCovRun) {
    MatrixXd beta(2, 3);
    beta << 0.0, 0.1, 0.05, 0.0, -0.02, 0.08;
    const ModelSpec spec = make_intercept_spec(beta, MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
    ExperimentOptions opt;
    opt.cov = CovMode::EstimatedCov;
    const ExperimentResult r = monte_carlo_experiment(spec, {60, 10}, iid_config(200, 72), opt);
    EXPECT_EQ(r.failed_paths, 0);
    EXPECT_TRUE(std::isfinite(r.replication.value));
    EXPECT_GT(r.is.mean.value, r.oos.mean.value);
}

TEST(MonteCarloExperiment, RidgeAndPanelFits) {
    MatrixXd beta = MatrixXd::Constant(3, 2, 0.05);
    const ModelSpec spec = make_standard_spec(beta, MatrixXd::Identity(3, 3));
    ExperimentOptions ols, ridge, panel;
    ridge.fit = FitMethod::ridge(0.1);
    panel.fit = FitMethod::panel(shared_signal_grouping(3, 2));
    const SimulationConfig c = iid_config(400, 73);
    const double gap_ols = monte_carlo_experiment(spec, {80, 20}, c, ols).mean_gap.value;
    const double gap_ridge = monte_carlo_experiment(spec, {80, 20}, c, ridge).mean_gap.value;
    const double gap_panel = monte_carlo_experiment(spec, {80, 20}, c, panel).mean_gap.value;
    EXPECT_LT(gap_ridge, gap_ols);
    EXPECT_LT(gap_panel, gap_ols);
}

TEST(MonteCarloExperiment, SinglePathFlagsUndefinedErrors) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Constant(1, 1, 0.1), MatrixXd::Identity(1, 1));
    const ExperimentResult r = monte_carlo_experiment(spec, {30, 5}, iid_config(1, 74));
    EXPECT_FALSE(r.se_defined);
    EXPECT_TRUE(std::isnan(r.is.mean.se));
    EXPECT_TRUE(std::isnan(r.replication.se));
    EXPECT_TRUE(std::isfinite(r.is.mean.value));
}

TEST(MonteCarloExperiment, RequiresTwoOutOfSampleSteps) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Constant(1, 1, 0.1), MatrixXd::Identity(1, 1));
    EXPECT_THROW(monte_carlo_experiment(spec, {30, 1}, iid_config(10, 0)), ValidationError);
}

TEST(MonteCarloExperiment, IdenticalAcrossThreadCounts) {
    MatrixXd beta(2, 2);
    beta << 0.1, 0.0, 0.05, 0.2;
    const ModelSpec spec = make_standard_spec(beta, MatrixXd::Identity(2, 2));
    SimulationConfig c = iid_config(64, 75);
    ExperimentOptions opt;
    opt.keep_paths = true;
    const ExperimentResult one = monte_carlo_experiment(spec, {40, 10}, c, opt);
    c.threads = 4;
    const ExperimentResult four = monte_carlo_experiment(spec, {40, 10}, c, opt);
    ASSERT_EQ(one.paths.size(), four.paths.size());
    for (std::size_t i = 0; i < one.paths.size(); ++i) {
        EXPECT_EQ(one.paths[i].is.mean, four.paths[i].is.mean);
        EXPECT_EQ(one.paths[i].oos.variance, four.paths[i].oos.variance);
    }
    EXPECT_EQ(one.is.sharpe.value, four.is.sharpe.value);
    EXPECT_EQ(one.replication.se, four.replication.se);
}

TEST(ParallelFor, CoversEveryIndexAndRethrows) {
    std::vector<int> hits(100, 0);
    parallel_for(100, 3, [&](int i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 2, [](int i) {
                     if (i == 7) throw NumericalError("boom");
                 }),
                 NumericalError);
}

TEST(SampleLkj, UnitDiagonalAndOffDiagonalVariance) {
    std::mt19937_64 rng(81);
    const int d = 4;
    const double eta = 2.0;
    const int draws = 20000;
    double ss = 0.0;
    for (int k = 0; k < draws; ++k) {
        const MatrixXd c = sample_lkj(d, eta, rng);
        ASSERT_TRUE((c.diagonal().array() == 1.0).all());
        ASSERT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(c).eigenvalues().minCoeff(), -1e-12);
        ss += c(0, 3) * c(0, 3) + c(1, 2) * c(1, 2);
    }
    // LKJ marginals are Beta(eta - 1 + d/2, same) on (-1, 1), variance 1/(2 eta + d - 1).
    const double var = ss / (2.0 * draws);
    const double expected = 1.0 / (2.0 * eta + d - 1.0);
    EXPECT_NEAR(var, expected, 0.05 * expected);
}

TEST(SampleRandomModel, ValidDraws) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ModelSpec spec = sample_random_model(4, 3, std::nullopt, seed);
        EXPECT_TRUE(validate_model(spec).ok);
        EXPECT_TRUE((spec.sigma_s.diagonal().array() == 1.0).all());
        EXPECT_TRUE(spec.mu_s.isZero());
        EXPECT_FALSE(spec.has_intercept);
        EXPECT_TRUE(is_positive_definite(spec.sigma_eps));
    }
}

TEST(SampleRandomModel, HitsTargetSharpe) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EXPECT_NEAR(true_sharpe(sample_random_model(5, 4, 0.05, seed)), 0.05, 1e-8);
    }
    EXPECT_TRUE(sample_random_model(3, 2, 0.0, 1).beta.isZero());
    EXPECT_THROW(sample_random_model(3, 2, -0.1, 1), ValidationError);
}

TEST(SampleRandomModel, UnreachableTargetReportsSupremum) {
    try {
        sample_random_model(1, 1, 5.0, 2);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("supremum"), std::string::npos);
        // m = p = 1: SR(c) = c^2 b^2 / sqrt(2 c^4 b^4 + c^2 b^2 / sigma^2) -> 1/sqrt(2).
        EXPECT_NE(std::string(e.what()).find("0.7071"), std::string::npos);
    }
}

TEST(EstimateEpsilon, ZeroBetaIsSmall) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2));
    const EpsilonEstimate e = estimate_epsilon(spec, {100, 2}, 3000, 91, 1);
    EXPECT_LT(std::abs(e.percent), 3.0);
    EXPECT_GT(e.se, 0.0);
    EXPECT_NEAR(e.epsilon, e.simulated_is_var - e.analytic_is_var, 1e-15);
    EXPECT_THROW(estimate_epsilon(spec, {100, 2}, 0, 91, 1), ValidationError);
}

TEST(ConvexityGap, VanishesForLongWindows) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Constant(1, 1, 0.05), MatrixXd::Identity(1, 1));
    const ConvexityGap g = convexity_gap(spec, {100000, 100000}, 40, 92, 1);
    EXPECT_TRUE(g.defined);
    EXPECT_LT(std::abs(g.is_gap.value), 0.002);
    EXPECT_LT(std::abs(g.oos_gap.value), 0.002);
    EXPECT_FALSE(convexity_gap(spec, {50, 10}, 1, 92, 1).defined);
}

TEST(TradingWeights, EstimatedCovUsesShrunkResiduals) {
    const ModelSpec spec = make_standard_spec(MatrixXd::Zero(3, 1), MatrixXd::Identity(3, 3));
    std::mt19937_64 rng(93);
    std::normal_distribution<double> n01;
    MatrixXd resid(3, 2);
    for (Eigen::Index i = 0; i < resid.size(); ++i) resid.data()[i] = n01(rng);
    const MatrixXd z = trading_weights(spec, CovMode::EstimatedCov, resid);
    EXPECT_TRUE(z.allFinite());
    const MatrixXd shrunk = shrink_covariance(sample_covariance(resid, true), 1);
    EXPECT_LT((z * shrunk - MatrixXd::Identity(3, 3)).norm(), 1e-10);
    EXPECT_EQ(trading_weights(spec, CovMode::TrueCov, resid), MatrixXd::Identity(3, 3));
}

}  // namespace
}  // namespace overfit
