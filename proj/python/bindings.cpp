/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "esmdaloc/esmda.hpp"
#include "esmdaloc/forward.hpp"
#include "esmdaloc/localization.hpp"
#include "esmdaloc/matrix_io.hpp"
#include "esmdaloc/metrics.hpp"
#include "esmdaloc/surrogate.hpp"

namespace py = pybind11;
using namespace esmdaloc;

namespace {

/// Forward model backed by a Python callable f(physical: ndarray) -> ndarray.
class CallableModel final : public ForwardModel {
 public:
  CallableModel(py::function fn, std::size_t n_params, std::vector<std::string> kinds)
      : fn_(std::move(fn)), n_params_(n_params) {
    for (auto & k : kinds) layout_.push_back({k, 0, std::nullopt});
  }
  ~CallableModel() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }
  std::size_t n_params() const override { return n_params_; }
  const std::vector<DatumInfo> & layout() const override { return layout_; }
  Vector evaluate(const Vector & physical) const override {
    py::gil_scoped_acquire gil;
    return fn_(physical).cast<Vector>();
  }

 private:
  py::function fn_;
  std::size_t n_params_;
  std::vector<DatumInfo> layout_;
};

std::vector<Transform> parse_transforms(const std::vector<std::string> & names) {
  std::vector<Transform> out;
  for (const auto & n : names) {
    if (n == "identity") out.push_back(Transform::identity);
    else if (n == "log") out.push_back(Transform::log);
    else throw InvalidArgument("unknown transform '" + n + "'");
  }
  return out;
}

CbMode parse_cb_mode(const std::string & s) {
  if (s == "hard") return CbMode::hard;
  if (s == "soft") return CbMode::soft;
  throw InvalidArgument("cb mode must be 'hard' or 'soft'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ES-MDA with localization: core operations";
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  // ---------------------------------------------------------------- ensemble
  py::class_<GridCoord>(m, "GridCoord")
      .def(py::init<int, int, int>(), py::arg("i"), py::arg("j"), py::arg("k") = 0)
      .def_readwrite("i", &GridCoord::i)
      .def_readwrite("j", &GridCoord::j)
      .def_readwrite("k", &GridCoord::k)
      .def("__repr__", [](const GridCoord & c) {
        return "GridCoord(" + std::to_string(c.i) + ", " + std::to_string(c.j) + ", " + std::to_string(c.k) + ")";
      });

  py::class_<ParameterSpace>(m, "ParameterSpace")
      .def(py::init([](std::vector<std::string> names, Vector mean, Matrix cov, std::vector<std::string> transforms,
                       std::vector<bool> dummy, std::optional<std::vector<GridCoord>> geometry) {
             return ParameterSpace(std::move(names), std::move(mean), std::move(cov), parse_transforms(transforms),
                                   std::move(dummy), std::move(geometry));
           }),
           py::arg("names"), py::arg("prior_mean"), py::arg("prior_cov"), py::arg("transforms") = std::vector<std::string>{},
           py::arg("dummy_mask") = std::vector<bool>{}, py::arg("geometry") = std::nullopt)
      .def_property_readonly("names", &ParameterSpace::names)
      .def_property_readonly("prior_mean", &ParameterSpace::prior_mean)
      .def_property_readonly("prior_cov", &ParameterSpace::prior_cov)
      .def_property_readonly("dummy_mask", &ParameterSpace::dummy_mask)
      .def_property_readonly("geometry", &ParameterSpace::geometry)
      .def("to_physical", [](const ParameterSpace & s, const Vector & v) { return s.to_physical(v); })
      .def("__len__", &ParameterSpace::size);

  py::class_<ObservationSet>(m, "ObservationSet")
      .def(py::init([](Vector d, Vector var, std::vector<std::string> kind,
                       std::vector<std::optional<GridCoord>> location, std::vector<int> time_index) {
             ObservationSet o;
             const auto n = static_cast<std::size_t>(d.size());
             o.d_obs = std::move(d);
             o.error_variance = std::move(var);
             o.kind = kind.empty() ? std::vector<std::string>(n, "d") : std::move(kind);
             o.location = location.empty() ? std::vector<std::optional<GridCoord>>(n) : std::move(location);
             o.time_index = time_index.empty() ? std::vector<int>(n, 0) : std::move(time_index);
             o.validate();
             return o;
           }),
           py::arg("d_obs"), py::arg("error_variance"), py::arg("kind") = std::vector<std::string>{},
           py::arg("location") = std::vector<std::optional<GridCoord>>{}, py::arg("time_index") = std::vector<int>{})
      .def_readonly("d_obs", &ObservationSet::d_obs)
      .def_readonly("error_variance", &ObservationSet::error_variance)
      .def_readonly("kind", &ObservationSet::kind)
      .def_readonly("location", &ObservationSet::location)
      .def_readonly("time_index", &ObservationSet::time_index)
      .def("__len__", &ObservationSet::size);

  m.def("sample_prior", [](const ParameterSpace & s, Eigen::Index n, std::uint64_t seed) {
    return sample_prior(s, n, seed).matrix();
  }, py::arg("space"), py::arg("n"), py::arg("seed"), "N_m x n prior draws, one member per column.");
  m.def("estimate_cross_cov", py::overload_cast<const Matrix &, const Matrix &>(&estimate_cross_cov));
  m.def("estimate_auto_cov", py::overload_cast<const Matrix &>(&estimate_auto_cov));
  m.def("estimate_variances", &estimate_variances);
  m.def("correlation_from_cov", &correlation_from_cov, py::arg("cross"), py::arg("var_rows"), py::arg("var_cols"));
  m.def("derive_seed", [](std::uint64_t base, std::vector<std::uint64_t> rest) {
    std::uint64_t s = base;
    if (rest.empty()) return derive_seed(s);
    for (auto r : rest) s = derive_seed(s, r);
    return s;
  }, py::arg("base"), py::arg("rest") = std::vector<std::uint64_t>{});

  // ------------------------------------------------------------ localization
  m.def("gaspari_cohn", &gaspari_cohn, py::arg("z"));
  m.def("po_localization", [](const Matrix & c, const Vector & vm, const Vector & vd, Eigen::Index n, double eta) {
    return po_localization(c, vm, vd, n, eta).matrix();
  }, py::arg("cross_cov"), py::arg("var_m"), py::arg("var_d"), py::arg("ensemble_size"), py::arg("eta") = 1e-3);
  m.def("cb_localization", [](const Matrix & rho, double eta, const std::string & mode) {
    return cb_localization(rho, eta, parse_cb_mode(mode)).matrix();
  }, py::arg("correlations"), py::arg("eta") = 1e-3, py::arg("mode") = "soft");
  m.def("distance_localization", [](const ParameterSpace & s, const ObservationSet & o, double length) {
    return distance_localization(s, o, length).matrix();
  }, py::arg("space"), py::arg("obs"), py::arg("correlation_length") = 10.0);
  m.def("cm_correct_covariance", [](const Matrix & t, const Matrix & e, const Matrix & cmd) {
    return cm_correct_covariance(t, e, cmd).covariance;
  }, py::arg("true_cmm"), py::arg("est_cmm"), py::arg("est_cmd"));
  m.def("apply_localization", [](const Matrix & r, const Matrix & gain) {
    return apply_localization(LocalizationMatrix(r), gain);
  }, py::arg("r"), py::arg("gain"));
  m.def("combine_localizations", [](const Matrix & a, const Matrix & b) {
    return combine_localizations(LocalizationMatrix(a), LocalizationMatrix(b)).matrix();
  });

  py::class_<LocalizationConfig>(m, "LocalizationConfig")
      .def(py::init<>())
      .def_property("scheme", [](const LocalizationConfig & c) { return to_string(c.scheme); },
                    [](LocalizationConfig & c, const std::string & s) { c.scheme = parse_scheme(s); })
      .def_property("schedule", [](const LocalizationConfig & c) { return to_string(c.schedule); },
                    [](LocalizationConfig & c, const std::string & s) { c.schedule = parse_schedule(s); })
      .def_property("taper", [](const LocalizationConfig & c) { return to_string(c.taper); },
                    [](LocalizationConfig & c, const std::string & s) { c.taper = parse_taper(s); })
      .def_readwrite("eta", &LocalizationConfig::eta)
      .def_readwrite("correlation_length", &LocalizationConfig::correlation_length);

  // --------------------------------------------------------------- surrogate
  py::class_<RegressorSpec>(m, "RegressorSpec")
      .def(py::init([](const std::string & kind, std::uint64_t seed) {
             return RegressorSpec::defaults(parse_regressor_kind(kind), seed);
           }),
           py::arg("kind") = "gbdt", py::arg("seed") = 0)
      .def_property_readonly("kind", [](const RegressorSpec & s) { return to_string(s.kind); })
      .def_readwrite("n_estimators", &RegressorSpec::n_estimators)
      .def_readwrite("max_depth", &RegressorSpec::max_depth)
      .def_readwrite("min_samples_leaf", &RegressorSpec::min_samples_leaf)
      .def_readwrite("learning_rate", &RegressorSpec::learning_rate)
      .def_readwrite("max_features", &RegressorSpec::max_features)
      .def_readwrite("bootstrap", &RegressorSpec::bootstrap)
      .def_readwrite("seed", &RegressorSpec::seed);

  py::class_<TrainedSurrogate>(m, "TrainedSurrogate")
      .def_property_readonly("kind", [](const TrainedSurrogate & s) { return to_string(s.kind()); })
      .def_property_readonly("training_rmse", &TrainedSurrogate::training_rmse)
      .def_property_readonly("slope", &TrainedSurrogate::slope)
      .def_property_readonly("intercept", &TrainedSurrogate::intercept)
      .def("predict", [](const TrainedSurrogate & s, const Matrix & x, std::size_t w) {
        return predict(s, x, w).matrix();
      }, py::arg("params"), py::arg("workers") = 1)
      .def("save", [](const TrainedSurrogate & s, const std::string & p) { save_surrogate(s, p); });
  m.def("fit", [](const Matrix & x, const Matrix & y, const RegressorSpec & spec, std::size_t w) {
    return fit(Ensemble(x), DataBatch(y), spec, w);
  }, py::arg("params"), py::arg("data"), py::arg("spec") = RegressorSpec::defaults(RegressorKind::gbdt),
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("load_surrogate", &load_surrogate);
  m.def("ml_covariance", &ml_covariance, py::arg("model"), py::arg("space"), py::arg("n_super"), py::arg("seed"),
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

  // ----------------------------------------------------------------- forward
  py::class_<ForwardModel, std::shared_ptr<ForwardModel>>(m, "ForwardModel")
      .def_property_readonly("n_params", &ForwardModel::n_params)
      .def_property_readonly("n_data", &ForwardModel::n_data)
      .def_property_readonly("kinds", [](const ForwardModel & f) {
        std::vector<std::string> k;
        for (const auto & d : f.layout()) k.push_back(d.kind);
        return k;
      })
      .def("evaluate", &ForwardModel::evaluate);
  py::class_<CallableModel, ForwardModel, std::shared_ptr<CallableModel>>(m, "CallableModel")
      .def(py::init<py::function, std::size_t, std::vector<std::string>>(), py::arg("fn"), py::arg("n_params"),
           py::arg("kinds"));

  py::class_<ScalarBenchmarkSpec>(m, "ScalarBenchmarkSpec")
      .def(py::init<>())
      .def_readwrite("n_params", &ScalarBenchmarkSpec::n_params)
      .def_readwrite("n_dummy", &ScalarBenchmarkSpec::n_dummy)
      .def_readwrite("n_series", &ScalarBenchmarkSpec::n_series)
      .def_readwrite("n_times", &ScalarBenchmarkSpec::n_times)
      .def_readwrite("coefficient_seed", &ScalarBenchmarkSpec::coefficient_seed);
  py::class_<ScalarBenchmark, ForwardModel, std::shared_ptr<ScalarBenchmark>>(m, "ScalarBenchmark")
      .def(py::init<const ScalarBenchmarkSpec &>(), py::arg("spec") = ScalarBenchmarkSpec{})
      .def_property_readonly("linear", &ScalarBenchmark::linear)
      .def_property_readonly("quadratic", &ScalarBenchmark::quadratic)
      .def("dummy_mask", &ScalarBenchmark::dummy_mask)
      .def("parameter_space", &ScalarBenchmark::parameter_space);

  py::class_<GridFlowSpec>(m, "GridFlowSpec")
      .def(py::init<>())
      .def_readwrite("nx", &GridFlowSpec::nx)
      .def_readwrite("ny", &GridFlowSpec::ny)
      .def_readwrite("injection_rate", &GridFlowSpec::injection_rate)
      .def_readwrite("initial_pressure", &GridFlowSpec::initial_pressure)
      .def_readwrite("monitor_offset", &GridFlowSpec::monitor_offset)
      .def_readwrite("n_report_times", &GridFlowSpec::n_report_times);
  py::class_<GridFlowModel, ForwardModel, std::shared_ptr<GridFlowModel>>(m, "GridFlowModel")
      .def(py::init<const GridFlowSpec &>(), py::arg("spec") = GridFlowSpec{});
  m.def("grid_flow_simulate", &grid_flow_simulate, py::arg("spec"), py::arg("log_perm_field"));
  m.def("grid_geometry", &grid_geometry);

  py::class_<GrfSpec>(m, "GrfSpec")
      .def(py::init<>())
      .def_property("kernel", [](const GrfSpec & g) { return to_string(g.kernel); },
                    [](GrfSpec & g, const std::string & s) { g.kernel = parse_grf_kernel(s); })
      .def_readwrite("correlation_length", &GrfSpec::correlation_length)
      .def_readwrite("log_mean", &GrfSpec::log_mean)
      .def_readwrite("log_std", &GrfSpec::log_std);
  m.def("grf_kernel_matrix", &grf_kernel_matrix);
  m.def("grf_parameter_space", &grf_parameter_space);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init<>())
      .def_readwrite("default_fraction", &NoiseSpec::default_fraction)
      .def_readwrite("kind_fraction", &NoiseSpec::kind_fraction)
      .def_readwrite("floor", &NoiseSpec::floor);
  m.def("make_truth_and_observations", [](const ForwardModel & f, const ParameterSpace & s, const NoiseSpec & n,
                                          std::uint64_t seed) {
    auto t = make_truth_and_observations(f, s, n, seed);
    return py::make_tuple(t.truth, t.truth_data, t.obs);
  }, py::arg("model"), py::arg("space"), py::arg("noise") = NoiseSpec{}, py::arg("seed") = 0);
  m.def("simulate_ensemble", [](const ForwardModel & f, const ParameterSpace & s, const Matrix & x, std::size_t w) {
    return simulate_ensemble(f, s, x, w).matrix();
  }, py::arg("model"), py::arg("space"), py::arg("members"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());

  // ------------------------------------------------------------------- esmda
  m.def("inflation_schedule", &inflation_schedule);
  m.def("perturb_observations", &perturb_observations, py::arg("obs"), py::arg("alpha"), py::arg("n"), py::arg("seed"));
  m.def("kalman_gain", &kalman_gain, py::arg("params"), py::arg("predicted"), py::arg("obs"), py::arg("alpha"));
  m.def("analysis_update", [](const Matrix & x, const Matrix & d, const ObservationSet & o, double alpha,
                              std::optional<Matrix> r, std::uint64_t seed) {
    const LocalizationMatrix lm = r ? LocalizationMatrix(*r) : LocalizationMatrix::ones(x.rows(), d.rows());
    return analysis_update(Ensemble(x), DataBatch(d), o, alpha, lm, seed).matrix();
  }, py::arg("params"), py::arg("predicted"), py::arg("obs"), py::arg("alpha"), py::arg("r") = std::nullopt,
        py::arg("seed") = 0);

  py::class_<EsmdaConfig>(m, "EsmdaConfig")
      .def(py::init<>())
      .def_readwrite("n_assimilations", &EsmdaConfig::n_assimilations)
      .def_readwrite("inflation", &EsmdaConfig::inflation)
      .def_readwrite("seed", &EsmdaConfig::seed)
      .def_readwrite("localization_seed", &EsmdaConfig::localization_seed)
      .def_readwrite("localization", &EsmdaConfig::localization)
      .def_readwrite("super_ensemble_size", &EsmdaConfig::super_ensemble_size)
      .def_readwrite("regressor", &EsmdaConfig::regressor)
      .def_readwrite("workers", &EsmdaConfig::workers)
      .def("alphas", &EsmdaConfig::alphas);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("alphas", &RunResult::alphas)
      .def_property_readonly("prior", [](const RunResult & r) { return r.prior.matrix(); })
      .def_property_readonly("prior_predicted", [](const RunResult & r) { return r.prior_predicted.matrix(); })
      .def_property_readonly("posteriors", [](const RunResult & r) {
        std::vector<Matrix> out;
        for (const auto & e : r.posteriors) out.push_back(e.matrix());
        return out;
      })
      .def_property_readonly("predictions", [](const RunResult & r) {
        std::vector<Matrix> out;
        for (const auto & e : r.predictions) out.push_back(e.matrix());
        return out;
      })
      .def_property_readonly("localizations", [](const RunResult & r) {
        std::vector<Matrix> out;
        for (const auto & e : r.localizations) out.push_back(e.matrix());
        return out;
      })
      .def_readonly("objectives", &RunResult::objectives)
      .def_readonly("forward_calls", &RunResult::forward_calls)
      .def_readonly("wall_seconds", &RunResult::wall_seconds)
      .def_readonly("warnings", &RunResult::warnings)
      .def_property_readonly("posterior", [](const RunResult & r) { return r.final_ensemble().matrix(); });

  m.def("run", &run, py::arg("config"), py::arg("space"), py::arg("model"), py::arg("obs"), py::arg("n_members"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_from", [](const EsmdaConfig & c, const ParameterSpace & s, const ForwardModel & f,
                       const ObservationSet & o, const Matrix & prior) {
    return run_from(c, s, f, o, Ensemble(prior));
  }, py::arg("config"), py::arg("space"), py::arg("model"), py::arg("obs"), py::arg("prior"),
        py::call_guard<py::gil_scoped_release>());

  // ----------------------------------------------------------------- metrics
  m.def("objective", [](const ObservationSet & o, const Matrix & d) { return objective(o, DataBatch(d)); });
  m.def("normalized_variance", [](const Matrix & a, const Matrix & b, std::vector<bool> mask) {
    return normalized_variance(Ensemble(a), Ensemble(b), mask);
  }, py::arg("prior"), py::arg("posterior"), py::arg("mask") = std::vector<bool>{});
  m.def("mean_offset", [](const Matrix & a, const Matrix & b) { return mean_offset(Ensemble(a), Ensemble(b)); });
  m.def("distribution_divergences", [](const Matrix & a, const Matrix & b, int bins) {
    HistogramOptions opt;
    opt.bins = bins;
    const Divergences d = distribution_divergences(a, b, opt);
    return py::dict(py::arg("bc") = d.bc, py::arg("js") = d.js);
  }, py::arg("prior"), py::arg("posterior"), py::arg("bins") = 32);
  m.def("spectral_norm", &spectral_norm);
  m.def("correlation_error", [](const Matrix & a, const Matrix & b) {
    const CorrelationError e = correlation_error(a, b);
    return py::dict(py::arg("frobenius_rmse") = e.frobenius_rmse, py::arg("spectral") = e.spectral);
  }, py::arg("localized_corr"), py::arg("reference_corr"));
  m.def("gold_standard_correlation", &gold_standard_correlation, py::arg("space"), py::arg("model"),
        py::arg("n_reference"), py::arg("seed"), py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("metrics_report", [](const ParameterSpace & s, const ObservationSet & o, const Matrix & prior,
                             const Matrix & post, const Matrix & pred) {
    const MetricsReport r = make_report(s, o, Ensemble(prior), Ensemble(post), DataBatch(pred));
    return py::dict(py::arg("objective_mean") = r.objective_mean, py::arg("objective_std") = r.objective_std,
                    py::arg("nv_all") = r.nv_all, py::arg("nv_dummy") = r.nv_dummy,
                    py::arg("nv_normal") = r.nv_normal, py::arg("mean_offset") = r.mean_offset,
                    py::arg("bc") = r.bc, py::arg("js") = r.js);
  });

  m.def("read_matrix", &read_matrix);
  m.def("write_matrix", &write_matrix, py::arg("path"), py::arg("matrix"), py::arg("label") = "");
}
