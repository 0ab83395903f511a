#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "penkf/errors.hpp"
#include "penkf/experiment.hpp"
#include "penkf/filters.hpp"
#include "penkf/maxdet_fit.hpp"
#include "penkf/metrics.hpp"
#include "penkf/possibility.hpp"

namespace py = pybind11;
using namespace penkf;

namespace {

Transition as_transition(const py::object& f) {
  if (PyCallable_Check(f.ptr())) return f.cast<Transition>();
  return linear_transition(f.cast<Matrix>());
}

SparsityPattern as_pattern(const py::object& p) {
  if (p.is_none()) return SparsityPattern::full();
  if (py::isinstance<SparsityPattern>(p)) return p.cast<SparsityPattern>();
  return SparsityPattern::banded(p.cast<int>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Possibilistic ensemble Kalman filter core";

  auto base = py::register_exception<penkf::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<penkf::DimensionMismatch>(m, "DimensionMismatch", base);
  py::register_exception<penkf::NotPositiveDefinite>(m, "NotPositiveDefinite", base);
  py::register_exception<penkf::SingularMatrix>(m, "SingularMatrix", base);
  py::register_exception<penkf::CovarianceUnavailable>(m, "CovarianceUnavailable", base);
  py::register_exception<penkf::UnboundedProblem>(m, "UnboundedProblem", base);
  py::register_exception<penkf::MaxIterations>(m, "MaxIterations", base);
  py::register_exception<penkf::InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<penkf::ConfigError>(m, "ConfigError", base);
  py::register_exception<penkf::IoError>(m, "IoError", base);

  py::class_<GaussianPossibility>(m, "GaussianPossibility")
      .def_static("from_covariance", &GaussianPossibility::from_covariance, py::arg("mean"),
                  py::arg("covariance"))
      .def_static("from_precision", &GaussianPossibility::from_precision, py::arg("mean"),
                  py::arg("precision"))
      .def_static("uninformative", &GaussianPossibility::uninformative, py::arg("mean"))
      .def_property_readonly("mean", &GaussianPossibility::mean)
      .def_property_readonly("precision", &GaussianPossibility::precision)
      .def_property_readonly("covariance", &GaussianPossibility::covariance)
      .def_property_readonly("has_covariance", &GaussianPossibility::has_covariance)
      .def("__call__", [](const GaussianPossibility& g, const Vector& x) { return eval(g, x); });

  m.def("eval", &eval, py::arg("g"), py::arg("x"));
  m.def("epistemic_uncertainty", &epistemic_uncertainty, py::arg("g"));

  py::class_<WeightedEnsemble>(m, "WeightedEnsemble")
      .def(py::init<Matrix, Vector>(), py::arg("particles"), py::arg("weights"))
      .def_property_readonly("particles", &WeightedEnsemble::particles)
      .def_property_readonly("weights", &WeightedEnsemble::weights)
      .def_property_readonly("mode", &WeightedEnsemble::mode)
      .def("__len__", &WeightedEnsemble::size);

  py::class_<SparsityPattern>(m, "SparsityPattern")
      .def_static("full", &SparsityPattern::full)
      .def_static("banded", &SparsityPattern::banded, py::arg("bandwidth"))
      .def_static("explicit_zeros", &SparsityPattern::explicit_zeros, py::arg("zeros"))
      .def("is_free", &SparsityPattern::is_free)
      .def("project", &SparsityPattern::project);

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("newton_tol", &SolverOptions::newton_tol)
      .def_readwrite("max_condition", &SolverOptions::max_condition);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("precision", &FitResult::precision)
      .def_readonly("slacks", &FitResult::slacks)
      .def_readonly("iterations", &FitResult::iterations);

  m.def(
      "fit_precision",
      [](const WeightedEnsemble& ens, const py::object& pattern, const SolverOptions& opts) {
        return fit_precision(ens, as_pattern(pattern), opts);
      },
      py::arg("ensemble"), py::arg("pattern") = py::none(), py::arg("options") = SolverOptions{},
      "Max-det fit; pattern is None (full), a bandwidth or a SparsityPattern.");
  m.def("fit_precision_1d", &fit_precision_1d, py::arg("ensemble"));
  m.def("feasibility_margin", &feasibility_margin, py::arg("ensemble"), py::arg("precision"));
  m.def("nongaussianity_gaps", &nongaussianity_gaps, py::arg("ensemble"), py::arg("fit"));

  py::class_<KalmanState>(m, "KalmanState")
      .def(py::init([](Vector mean, Matrix cov) { return KalmanState{std::move(mean), std::move(cov)}; }),
           py::arg("mean"), py::arg("covariance"))
      .def_readwrite("mean", &KalmanState::mean)
      .def_readwrite("covariance", &KalmanState::covariance);
  m.def("kf_predict", &kf_predict, py::arg("state"), py::arg("f"), py::arg("u"));
  m.def("kf_update", &kf_update, py::arg("state"), py::arg("y"), py::arg("h"), py::arg("v"));

  m.def(
      "sqrt_enkf_update",
      [](const Matrix& members, const Vector& y, const Matrix& h, const Matrix& v) {
        const ProbEnsemble ens{members};
        const auto moments = ensemble_moments(ens);
        return sqrt_enkf_update(ens, moments.mean, moments.covariance, y, h, v).members;
      },
      py::arg("members"), py::arg("y"), py::arg("h"), py::arg("v"),
      "Deterministic square-root update of an unweighted ensemble (one member per column).");

  py::class_<PenkfPrediction>(m, "PenkfPrediction")
      .def_readonly("ensemble", &PenkfPrediction::ensemble)
      .def_readonly("predicted", &PenkfPrediction::predicted)
      .def_readonly("fit", &PenkfPrediction::fit)
      .def_readonly("feasibility_margin", &PenkfPrediction::feasibility_margin);
  py::class_<PenkfUpdate>(m, "PenkfUpdate")
      .def_readonly("ensemble", &PenkfUpdate::ensemble)
      .def_readonly("posterior", &PenkfUpdate::posterior);

  m.def(
      "penkf_predict",
      [](const WeightedEnsemble& ens, const py::object& f, const Matrix& u, const py::object& pattern,
         const SolverOptions& opts) { return penkf_predict(ens, as_transition(f), u, as_pattern(pattern), opts); },
      py::arg("ensemble"), py::arg("transition"), py::arg("u"), py::arg("pattern") = py::none(),
      py::arg("options") = SolverOptions{}, "transition is a matrix or a callable x -> F(x).");
  m.def("penkf_update", &penkf_update, py::arg("ensemble"), py::arg("predicted"), py::arg("y"),
        py::arg("h"), py::arg("v"));

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto cfg = parse_config(text);
        validate_config(cfg);
        return resolved_config_json(cfg);
      },
      py::arg("config_json"), "Returns the resolved config as JSON text.");
  m.def(
      "run_experiment",
      [](const std::string& text, int threads) {
        const auto cfg = parse_config(text);
        validate_config(cfg);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(cfg, threads);
        }
        return rows_to_csv(result.rows);
      },
      py::arg("config_json"), py::arg("threads") = 1, "Runs an experiment and returns the CSV text.");
  m.def(
      "variance_recovery",
      [](int n, const std::vector<int>& sizes, int trials, std::uint64_t seed) {
        std::vector<VarianceRecoveryRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_variance_recovery(n, sizes, trials, seed);
        }
        return variance_rows_to_csv(rows);
      },
      py::arg("n"), py::arg("sizes"), py::arg("trials"), py::arg("seed"));

  m.def("rmse", py::overload_cast<const Vector&, const Vector&>(&rmse));
  m.def("mahalanobis", &mahalanobis, py::arg("x"), py::arg("mean"), py::arg("covariance"));
  m.def("log_det", &log_det, py::arg("covariance"));
}
