#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dynsolve/em.hpp"
#include "dynsolve/evaluate.hpp"
#include "dynsolve/io.hpp"
#include "dynsolve/lyapunov.hpp"
#include "dynsolve/mne.hpp"
#include "dynsolve/simulate.hpp"

namespace py = pybind11;
using namespace dynsolve;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dynamic Bayesian source estimation on graph-structured state spaces";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<SourceGraph>(m, "SourceGraph")
      .def_readonly("positions", &SourceGraph::positions)
      .def_readonly("neighbors", &SourceGraph::neighbors)
      .def_readonly("distances", &SourceGraph::distances)
      .def_property_readonly("num_nodes", &SourceGraph::num_nodes);

  m.def("make_ring_graph", &make_ring_graph, py::arg("num_nodes"),
        py::arg("spacing_mm"));
  m.def("make_grid_graph", &make_grid_graph, py::arg("rows"), py::arg("cols"),
        py::arg("spacing_mm"));
  m.def("make_sphere_graph", &make_sphere_graph, py::arg("n_lat"),
        py::arg("n_lon"), py::arg("radius_mm"), py::arg("lat_min_deg") = -60.0,
        py::arg("lat_max_deg") = 60.0);
  m.def("load_graph_json", &load_graph_json, py::arg("path"));
  m.def("save_graph_json", &save_graph_json, py::arg("path"), py::arg("graph"));

  py::class_<FeedbackMatrix>(m, "FeedbackMatrix")
      .def_readonly("phi", &FeedbackMatrix::phi)
      .def("dense", [](const FeedbackMatrix& fb) {
        return Eigen::MatrixXd(fb.entries);
      })
      .def("folded_dense", &FeedbackMatrix::folded_dense);

  m.def("build_feedback_matrix", &build_feedback_matrix, py::arg("graph"),
        py::arg("phi"));
  m.def("steady_state_covariance", &steady_state_covariance,
        py::arg("feedback"), py::arg("q"));
  m.def("solve_discrete_lyapunov", &solve_discrete_lyapunov, py::arg("a"),
        py::arg("q"));
  m.def(
      "perturbation_bound_check",
      [](const Eigen::MatrixXd& f, const Eigen::MatrixXd& q,
         const Eigen::MatrixXd& df) {
        const PerturbationBound b = perturbation_bound_check(f, q, df);
        return py::make_tuple(b.lhs, b.rhs);
      },
      py::arg("f"), py::arg("q"), py::arg("delta_f"));

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("lead_field", &ModelSpec::lead_field)
      .def_readonly("c0", &ModelSpec::c0)
      .def_property_readonly("nu",
                             [](const ModelSpec& mo) { return mo.noise.nu; })
      .def_property_readonly(
          "lambda_", [](const ModelSpec& mo) { return mo.noise.lambda; })
      .def_property_readonly("phi",
                             [](const ModelSpec& mo) { return mo.feedback.phi; });

  m.def("make_model_spec", &make_model_spec, py::arg("lead_field"),
        py::arg("graph"), py::arg("phi"), py::arg("power_snr"),
        py::arg("b") = 3.1);

  py::class_<StateTrajectory>(m, "StateTrajectory")
      .def_readonly("p", &StateTrajectory::p)
      .def_readonly("n", &StateTrajectory::n)
      .def_readonly("T", &StateTrajectory::T)
      .def("filtered_means", &StateTrajectory::filtered_means_matrix)
      .def("predicted_means", &StateTrajectory::predicted_means_matrix)
      .def("smoothed_means", &StateTrajectory::smoothed_means_matrix)
      .def("ci_half_widths", &StateTrajectory::smoothed_ci_half_widths)
      .def("filtered_cov",
           [](const StateTrajectory& t, int i) { return t.filtered_cov.at(i); })
      .def("smoothed_cov",
           [](const StateTrajectory& t, int i) { return t.smoothed_cov.at(i); })
      .def("lag_cov",
           [](const StateTrajectory& t, int i) { return t.lag_cov.at(i); });

  m.def(
      "kalman_filter",
      [](const ModelSpec& model, const Eigen::MatrixXd& obs) {
        return kalman_filter(model, obs);
      },
      py::arg("model"), py::arg("observations"));
  m.def(
      "smooth",
      [](const ModelSpec& model, const Eigen::MatrixXd& obs) {
        StateTrajectory traj = kalman_filter(model, obs);
        fixed_interval_smoother(model, traj);
        lag_covariance(traj);
        return traj;
      },
      py::arg("model"), py::arg("observations"),
      "Kalman filter + fixed-interval smoother + lag covariances");
  m.def("penalized_ls_solve", &penalized_ls_solve, py::arg("prior_mean"),
        py::arg("prior_cov"), py::arg("x"), py::arg("y"));
  m.def("innovations_log_likelihood", &innovations_log_likelihood,
        py::arg("model"), py::arg("trajectory"), py::arg("observations"));

  py::class_<EmConfig>(m, "EmConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &EmConfig::max_iters)
      .def_readwrite("rel_tol", &EmConfig::rel_tol)
      .def_readwrite("update_c0", &EmConfig::update_c0);

  py::class_<EmIterate>(m, "EmIterate")
      .def_readonly("nu", &EmIterate::nu)
      .def_readonly("log_lik", &EmIterate::log_lik)
      .def_readonly("log_prior", &EmIterate::log_prior)
      .def_readonly("cost", &EmIterate::cost);

  py::class_<EmTrace>(m, "EmTrace")
      .def_readonly("iterates", &EmTrace::iterates)
      .def_readonly("converged", &EmTrace::converged)
      .def_readonly("iterations", &EmTrace::iterations);

  py::class_<EmResult>(m, "EmResult")
      .def_readonly("trajectory", &EmResult::trajectory)
      .def_readonly("nu_map", &EmResult::nu_map)
      .def_readonly("trace", &EmResult::trace);

  m.def("dmap_em", &dmap_em, py::arg("model"), py::arg("observations"),
        py::arg("config") = EmConfig{});
  m.def("smap_em", &smap_em, py::arg("model"), py::arg("observations"),
        py::arg("config") = EmConfig{});

  py::class_<MneResult>(m, "MneResult")
      .def_readonly("means", &MneResult::means)
      .def_readonly("posterior_cov", &MneResult::posterior_cov)
      .def_readonly("ci_half_width", &MneResult::ci_half_width);
  m.def(
      "mne_estimate",
      [](const Eigen::MatrixXd& prior_cov, const Eigen::MatrixXd& lead_field,
         const Eigen::MatrixXd& obs) {
        return mne_estimate(MneSpec{prior_cov, lead_field}, obs);
      },
      py::arg("prior_cov"), py::arg("lead_field"), py::arg("observations"));

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def(py::init<>())
      .def_readwrite("patch_indices", &SimulationConfig::patch_indices)
      .def_readwrite("waveform_freq_hz", &SimulationConfig::waveform_freq_hz)
      .def_readwrite("sample_rate_hz", &SimulationConfig::sample_rate_hz)
      .def_readwrite("duration_s", &SimulationConfig::duration_s)
      .def_readwrite("target_snr", &SimulationConfig::target_snr)
      .def_readwrite("refinement_factor", &SimulationConfig::refinement_factor)
      .def_readwrite("rng_seed", &SimulationConfig::rng_seed);

  py::class_<SimulationOutput>(m, "SimulationOutput")
      .def_readonly("observations", &SimulationOutput::observations)
      .def_readonly("true_coarse_sources", &SimulationOutput::true_coarse_sources)
      .def_readonly("active_mask", &SimulationOutput::active_mask)
      .def_readonly("achieved_snr", &SimulationOutput::achieved_snr);

  m.def("simulate_patch", &simulate_patch, py::arg("fine_graph"),
        py::arg("fine_lead_field"), py::arg("coarse_graph"), py::arg("config"));
  m.def("synth_lead_field", &synth_lead_field, py::arg("graph"),
        py::arg("n_sensors"), py::arg("seed"));
  m.def(
      "synth_lead_field_pair",
      [](const SourceGraph& coarse, const SourceGraph& fine, int n_sensors,
         std::uint64_t seed) {
        const LeadFieldPair pair =
            synth_lead_field_pair(coarse, fine, n_sensors, seed);
        return py::make_tuple(pair.coarse, pair.fine, pair.sensors);
      },
      py::arg("coarse_graph"), py::arg("fine_graph"), py::arg("n_sensors"),
      py::arg("seed"));
  m.def(
      "whiten",
      [](const Eigen::MatrixXd& obs, const Eigen::MatrixXd& lead_field,
         const Eigen::MatrixXd& noise_cov) {
        const WhitenedData w = whiten(obs, lead_field, noise_cov);
        return py::make_tuple(w.observations, w.lead_field);
      },
      py::arg("observations"), py::arg("lead_field"), py::arg("noise_cov"));
  m.def("nearest_coarse_map", &nearest_coarse_map, py::arg("fine_graph"),
        py::arg("coarse_graph"));

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("auc", &EvalReport::auc)
      .def_readonly("rmse_per_dipole", &EvalReport::rmse_per_dipole)
      .def_readonly("inside_mean", &EvalReport::inside_mean)
      .def_readonly("outside_quantiles", &EvalReport::outside_quantiles)
      .def_property_readonly("roc_points", [](const EvalReport& r) {
        py::list out;
        for (const auto& pt : r.roc_points) {
          out.append(py::make_tuple(pt.threshold, pt.pr_fa, pt.pr_d));
        }
        return out;
      });

  m.def("roc_curve", &roc_curve, py::arg("estimates"), py::arg("truth"),
        py::arg("thresholds"));
  m.def("default_threshold_grid", &default_threshold_grid, py::arg("estimates"));
  m.def("rmse", &rmse, py::arg("estimates"), py::arg("truth"),
        py::arg("active_mask"));
  m.def("evaluate_estimates", &evaluate_estimates, py::arg("estimates"),
        py::arg("truth"), py::arg("active_mask"));

  m.def("read_dsmx", &read_dsmx, py::arg("path"));
  m.def("write_dsmx", &write_dsmx, py::arg("path"), py::arg("matrix"));

  m.attr("__version__") = "0.1.0";
}
