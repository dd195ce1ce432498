#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overfit/analytic.hpp"
#include "overfit/calibration.hpp"
#include "overfit/model.hpp"
#include "overfit/simulation.hpp"

namespace overfit::io {

using nlohmann::json;

// Scalar -> 1 x 1, flat array -> column vector / 1 x n row, nested arrays -> rows.
MatrixXd matrix_from_json(const json& j, const std::string& what);
VectorXd vector_from_json(const json& j, const std::string& what);
json to_json(const MatrixXd& a);
json to_json(const VectorXd& v);

// Model forms:
//   {"beta": ..., "sigma_eps": ..., "sigma_s": ..., "mu_s": ..., "intercept": bool,
//    "weight_rule": "precision" | "diag_inverse" | "identity" | {"custom": ...}}
//   {"uniform": {"k": .., "m": .., "p": ..}}
//   {"random": {"m": .., "p": .., "target_sr": .., "seed": ..}}
// sigma_eps / sigma_s also accept "identity".
ModelSpec model_from_json(const json& j);
json model_to_json(const ModelSpec& spec);

BacktestWindow window_from_json(const json& j);
SimulationConfig simulation_config_from_json(const json& j, const ModelSpec& spec);
json to_json(const SimulationConfig& c);
ExperimentOptions experiment_options_from_json(const json& j, const ModelSpec& spec);
ResampleConfig resample_config_from_json(const json& j);
json to_json(const ResampleConfig& c);
CalibrationTarget calibration_target_from_json(const json& j);

json to_json(const MomentSummary& m);
json to_json(const SharpeReport& s);
json to_json(const AnalyticResult& a);
json to_json(const Estimate& e);
json to_json(const PeriodSummary& s);
json to_json(const ExperimentResult& r);
json to_json(const ResampleRecord& r);

// Shortest round-trip representation; NaN and infinities become empty cells.
std::string format_double(double x);

std::string csv_line(const std::vector<std::string>& fields);

std::string sha256_file(const std::filesystem::path& path);

// Tidy table: identifier columns, then quantity, value, se.
struct LongTable {
    struct Row {
        std::vector<double> ids;
        std::string quantity;
        double value = 0.0;
        double se = std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<std::string> id_columns;
    std::vector<Row> rows;

    void add(std::vector<double> ids, std::string quantity, double value,
             double se = std::numeric_limits<double>::quiet_NaN());
};

enum class PlotKind { ReplicationVsT1, ReplicationVsP, HeatmapSrT1, KanComparison, ResampleBins };

std::string to_string(PlotKind kind);
PlotKind plot_kind_from_string(const std::string& name);

// Identifier columns each kind must carry.
std::vector<std::string> plot_id_columns(PlotKind kind);

// Analytic curves over T1 for one spec.
LongTable replication_vs_t1(const ModelSpec& spec, const std::vector<int>& t1_grid, double annualization);

// Uniform-beta replication over p at a fixed per-step true Sharpe ratio.
LongTable replication_vs_p(double sr_true, int m, int t1, const std::vector<int>& p_grid,
                           double annualization);

// Uniform-beta replication over (true SR, T1); sr values are per step.
LongTable heatmap_sr_t1(const std::vector<double>& sr_grid, const std::vector<int>& t1_grid, int p, int m,
                        double annualization);

LongTable kan_comparison_table(const std::vector<KanComparisonRow>& rows);

LongTable resample_bins_table(const std::vector<ReplicationBin>& bins);

// CSV text for the table; throws ValidationError if its identifier columns
// do not match the kind.
std::string emit_plot_data(const LongTable& table, PlotKind kind);

// Output directory that refuses to overwrite anything.
class RunDirectory {
public:
    // Creates the directory; it must not exist or be empty.
    explicit RunDirectory(std::filesystem::path root);

    void write(const std::string& name, const std::string& content);
    const std::filesystem::path& root() const { return root_; }
    const std::vector<std::string>& outputs() const { return outputs_; }

private:
    std::filesystem::path root_;
    std::vector<std::string> outputs_;
};

struct InputFile {
    std::string path;
    std::string sha256;
};

json make_manifest(const std::string& command, const json& resolved_config, const std::vector<InputFile>& inputs,
                   const std::vector<std::string>& outputs);

}  // namespace overfit::io
