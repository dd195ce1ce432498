#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "overfit/analytic.hpp"
#include "overfit/error.hpp"
#include "overfit/model.hpp"
#include "overfit/simulation.hpp"

namespace overfit {

// Observed OOS Sharpe ratio to match with beta* = (0, k, ..., k).
struct CalibrationTarget {
    double observed_oos_sr = 0.0;  // per step
    int p_active = 1;
    int t1 = 0;
    MatrixXd sigma_eps_hat;  // m x m
    bool include_intercept = true;
};

enum class CalibrationStatus { Solved, NonPositiveTarget, AboveSupremum };

std::string to_string(CalibrationStatus status);

struct CalibrationResult {
    double k = 0.0;
    MatrixXd beta_star;  // m x (p_active + intercept)
    double sr_eoos = 0.0;
    double supremum = 0.0;
    int iterations = 0;
    CalibrationStatus status = CalibrationStatus::Solved;
};

class UnreachableTargetError : public ValidationError {
public:
    UnreachableTargetError(const std::string& what, double supremum)
        : ValidationError(what), supremum_(supremum) {}
    double supremum() const { return supremum_; }

private:
    double supremum_;
};

// Whitened-signal spec: mu_s = 0 and Sigma_s = I on active signals, optional
// leading intercept with zero coefficient, Z = sigma_eps_hat^{-1}.
ModelSpec implied_spec(const CalibrationTarget& target, double k);

double implied_sr_eoos(const CalibrationTarget& target, double k);

// SR_EOOS evaluated at k = 1e6.
double implied_supremum(const CalibrationTarget& target);

// Throws UnreachableTargetError when the target is at or above the supremum.
CalibrationResult implied_beta(const CalibrationTarget& target, double tol = 1e-8);

// Scale c > 0 such that the analytic SR_EIS of beta -> c beta equals the
// per-step target. Throws ValidationError when the target lies outside
// (SR_EIS at c=0, SR_EIS as c grows).
double scale_for_sr_eis(const ModelSpec& spec, const BacktestWindow& window, double target);

ModelSpec scale_beta(ModelSpec spec, double c);

// Aligned time series: signals(j, t) predicts returns(t); NaN marks a blank.
struct ResampleDataset {
    std::vector<std::string> dates;
    std::string return_name;
    std::vector<std::string> signal_names;
    VectorXd returns;  // T
    MatrixXd signals;  // N x T
    std::vector<std::pair<int, int>> coverage;  // first and last non-blank column per signal
    std::pair<int, int> return_coverage{0, -1};

    int n_steps() const { return static_cast<int>(returns.size()); }
    int n_signals() const { return static_cast<int>(signals.rows()); }
};

ResampleDataset make_resample_dataset(VectorXd returns, MatrixXd signals,
                                      std::vector<std::string> signal_names = {},
                                      std::vector<std::string> dates = {});

// CSV with a date column, a return column and signal columns; blanks allowed.
// return_column defaults to the first column after the date.
ResampleDataset load_resample_dataset(const std::string& path,
                                      const std::optional<std::string>& return_column = std::nullopt);

// Returns divided by the trailing return_window-step volatility of prior
// returns; signals divided by their expanding volatility up to and including
// the current step. Steps without min_history observations become blank.
ResampleDataset trailing_normalize(const ResampleDataset& data, int return_window = 12,
                                   int min_history = 12);

enum class WhiteningWindow { FullWindow, InSampleOnly };

std::string to_string(WhiteningWindow w);
WhiteningWindow whitening_window_from_string(const std::string& name);

struct ResampleConfig {
    int n_draws = 1000;
    double steps_per_year = 12.0;
    double min_leg_years = 5.0;
    double min_total_years = 10.0;
    double max_total_years = 70.0;
    int min_signals = 1;
    int max_signals = 0;  // 0: all signals
    std::uint64_t seed = 0;
    WhiteningWindow whitening = WhiteningWindow::FullWindow;
    int max_attempts_per_draw = 100;
    double calibration_tol = 1e-8;
    int threads = 0;
};

void validate_resample_config(const ResampleConfig& config, const ResampleDataset& data);

struct ResampleRecord {
    int draw = 0;
    int attempts = 0;
    std::vector<int> signals;
    int start = 0;
    int t1 = 0;
    int t2 = 0;
    SampleStats is;
    SampleStats oos;
    double sigma_eps_hat = 0.0;
    bool fit_failed = false;
    CalibrationStatus status = CalibrationStatus::Solved;
    double k = 0.0;
    double supremum = 0.0;
    bool analytic_defined = false;
    double sr_true = 0.0;  // implied
    double sr_eis = 0.0;
    double sr_eoos = 0.0;
    double replication = 0.0;

    int p() const { return static_cast<int>(signals.size()); }
};

// One record per draw, ordered by draw index.
std::vector<ResampleRecord> resample_study(const ResampleDataset& data, const ResampleConfig& config);

enum class BinKey { P, T1, ImpliedSR };

std::string to_string(BinKey key);
BinKey bin_key_from_string(const std::string& name);

struct ReplicationBin {
    BinKey key = BinKey::P;
    int bin = 0;
    double key_min = 0.0;
    double key_max = 0.0;
    double key_mean = 0.0;
    int count = 0;           // records with defined empirical Sharpe ratios
    int analytic_count = 0;  // records with analytic values
    Estimate ratio_of_expectations;        // E[SR_OOS] / E[SR_IS]
    Estimate expectation_of_ratio;         // E[SR_OOS / SR_IS]
    Estimate analytic_ratio_of_expectations;  // E[SR_EOOS] / E[SR_EIS]
    Estimate analytic_expectation_of_ratio;   // E[SR_EOOS / SR_EIS]
};

// Equal-count bins over the key; tied key values never straddle two bins.
std::vector<ReplicationBin> bin_records(const std::vector<ResampleRecord>& records, BinKey key,
                                        int n_bins = 20);

double bin_key_value(const ResampleRecord& r, BinKey key);

}  // namespace overfit
