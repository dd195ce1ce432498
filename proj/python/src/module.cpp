#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "overfit/analytic.hpp"
#include "overfit/calibration.hpp"
#include "overfit/cli.hpp"
#include "overfit/error.hpp"
#include "overfit/estimation.hpp"
#include "overfit/io.hpp"
#include "overfit/simulation.hpp"
#include "overfit/special_functions.hpp"

namespace py = pybind11;
using namespace overfit;
using overfit::io::json;

namespace {

// Plain Python containers (and anything with tolist(), e.g. numpy arrays) to JSON.
json from_python(py::handle obj) {
    if (obj.is_none()) return nullptr;
    if (py::isinstance<py::bool_>(obj)) return obj.cast<bool>();
    if (py::isinstance<py::int_>(obj)) return obj.cast<long long>();
    if (py::isinstance<py::float_>(obj)) return obj.cast<double>();
    if (py::isinstance<py::str>(obj)) return obj.cast<std::string>();
    if (py::isinstance<py::dict>(obj)) {
        json j = json::object();
        for (auto item : obj.cast<py::dict>()) j[py::str(item.first).cast<std::string>()] = from_python(item.second);
        return j;
    }
    if (py::isinstance<py::list>(obj) || py::isinstance<py::tuple>(obj)) {
        json j = json::array();
        for (auto item : obj) j.push_back(from_python(item));
        return j;
    }
    if (py::hasattr(obj, "tolist")) return from_python(obj.attr("tolist")());
    throw ValidationError("unsupported value of type " + py::str(py::type::of(obj)).cast<std::string>());
}

py::object to_python(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return py::none();
        case json::value_t::boolean: return py::bool_(j.get<bool>());
        case json::value_t::number_integer: return py::int_(j.get<long long>());
        case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
        case json::value_t::number_float: return py::float_(j.get<double>());
        case json::value_t::string: return py::str(j.get<std::string>());
        case json::value_t::array: {
            py::list out;
            for (const json& e : j) out.append(to_python(e));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_python(v);
            return out;
        }
        default: return py::none();
    }
}

ModelSpec model_arg(py::handle model) { return io::model_from_json(from_python(model)); }

json estimate(const Estimate& e) { return io::to_json(e); }

json bin_json(const ReplicationBin& b) {
    return json{{"key", to_string(b.key)},
                {"bin", b.bin},
                {"key_min", b.key_min},
                {"key_max", b.key_max},
                {"key_mean", b.key_mean},
                {"count", b.count},
                {"analytic_count", b.analytic_count},
                {"ratio_of_expectations", estimate(b.ratio_of_expectations)},
                {"expectation_of_ratio", estimate(b.expectation_of_ratio)},
                {"analytic_ratio_of_expectations", estimate(b.analytic_ratio_of_expectations)},
                {"analytic_expectation_of_ratio", estimate(b.analytic_expectation_of_ratio)}};
}

py::object analyze_py(py::handle model, int t1, int t2, double annualization) {
    return to_python(io::to_json(analyze(model_arg(model), {t1, t2}, annualization)));
}

py::object monte_carlo_py(py::handle model, int t1, int t2, py::handle simulation, py::handle options) {
    const ModelSpec spec = model_arg(model);
    const SimulationConfig cfg = io::simulation_config_from_json(from_python(simulation), spec);
    const ExperimentOptions opt = io::experiment_options_from_json(from_python(options), spec);
    return to_python(io::to_json(monte_carlo_experiment(spec, {t1, t2}, cfg, opt)));
}

py::object convexity_gap_py(py::handle model, int t1, int t2, int n_paths, std::uint64_t seed, int threads) {
    const ConvexityGap g = convexity_gap(model_arg(model), {t1, t2}, n_paths, seed, threads);
    return to_python(json{{"is_gap", estimate(g.is_gap)}, {"oos_gap", estimate(g.oos_gap)}});
}

py::object implied_beta_py(py::handle target, double tol) {
    const CalibrationResult r = implied_beta(io::calibration_target_from_json(from_python(target)), tol);
    return to_python(json{{"k", r.k},
                          {"beta_star", io::to_json(r.beta_star)},
                          {"sr_eoos", r.sr_eoos},
                          {"supremum", r.supremum},
                          {"iterations", r.iterations},
                          {"status", to_string(r.status)}});
}

py::object resample_py(const VectorXd& returns, const MatrixXd& signals, py::handle config, const std::string& key,
                       int n_bins) {
    const ResampleDataset data = make_resample_dataset(returns, signals);
    const ResampleConfig cfg = io::resample_config_from_json(from_python(config));
    const std::vector<ResampleRecord> records = resample_study(data, cfg);
    json recs = json::array();
    for (const ResampleRecord& r : records) recs.push_back(io::to_json(r));
    json bins = json::array();
    for (const ReplicationBin& b : bin_records(records, bin_key_from_string(key), n_bins)) bins.push_back(bin_json(b));
    return to_python(json{{"records", recs}, {"bins", bins}});
}

py::tuple run_cli_py(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"overfit-lab"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Expected in-sample and out-of-sample Sharpe ratios of linear predictive strategies";
    m.attr("__version__") = OVERFIT_VERSION;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("resolve_model", [](py::handle model) { return to_python(io::model_to_json(model_arg(model))); },
          py::arg("model"), "Validated model with every default filled in.");
    m.def("analyze", &analyze_py, py::arg("model"), py::arg("t1"), py::arg("t2"), py::arg("annualization") = 1.0,
          "Expected moments, SR_EIS, SR_EOOS and the replication ratio.");
    m.def("monte_carlo", &monte_carlo_py, py::arg("model"), py::arg("t1"), py::arg("t2"),
          py::arg("simulation") = py::none(), py::arg("options") = py::none(),
          "Simulated path statistics next to the analytic values.");
    m.def("convexity_gap", &convexity_gap_py, py::arg("model"), py::arg("t1"), py::arg("t2"), py::arg("n_paths"),
          py::arg("seed") = 0, py::arg("threads") = 0);
    m.def("implied_beta", &implied_beta_py, py::arg("target"), py::arg("tol") = 1e-8,
          "Uniform k matching an observed out-of-sample Sharpe ratio.");
    m.def("resample_study", &resample_py, py::arg("returns"), py::arg("signals"), py::arg("config") = py::dict(),
          py::arg("bin_key") = "p", py::arg("n_bins") = 20);
    m.def("run_cli", &run_cli_py, py::arg("args"), "Runs the command-line tool; returns (exit code, stdout, stderr).");

    m.def("hyp1f1", [](double a, double b, double z) { return hyp1f1_value(a, b, z); }, py::arg("a"), py::arg("b"),
          py::arg("z"));
    m.def("kan_expected_is_sr", &kan_expected_is_sr, py::arg("theta"), py::arg("m"), py::arg("t"));
    m.def("kan_expected_oos_sr", &kan_expected_oos_sr, py::arg("theta"), py::arg("m"), py::arg("t"));
    m.def("univariate_replication", &univariate_replication, py::arg("beta"), py::arg("t1"));
    m.def("uniform_beta_replication", &uniform_beta_replication, py::arg("k"), py::arg("p"), py::arg("m"),
          py::arg("t1"));
    m.def("hat_diagonal", &hat_diagonal, py::arg("signals"));
    m.def("expected_hat_sq", &expected_hat_sq, py::arg("p"), py::arg("t"), py::arg("ones_mu") = 0.0);
    m.def("shrink_covariance", &shrink_covariance, py::arg("sigma_hat"), py::arg("t_eff"));
}
