#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dynsolve/em.hpp"
#include "dynsolve/evaluate.hpp"
#include "dynsolve/simulate.hpp"
#include "dynsolve/trajectory.hpp"

namespace dynsolve {

// DSMX container: magic "DSMX", u32 rows, u32 cols, then rows*cols f64,
// row-major, little-endian.
void write_dsmx(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_dsmx(const std::string& path);

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_csv_matrix(const std::string& path);

// Trajectory bundle: one DSMX per present field plus manifest.json with
// dimensions, T, and the field list. Means are stored one time step per
// row; covariance sequences are stacked blocks of p rows.
void save_trajectory(const std::string& dir, const StateTrajectory& traj);
StateTrajectory load_trajectory(const std::string& dir);

// Creates the leaf output directory; a missing parent is an IoError.
void ensure_output_dir(const std::string& dir);

// Simulation bundle: observations.dsmx, truth.dsmx, mask.json, meta.json.
void save_simulation_bundle(const std::string& dir, const SimulationOutput& out,
                            const SimulationConfig& config,
                            const std::vector<int>& coarse_parent);
struct SimulationBundle {
  SimulationOutput output;
  SimulationConfig config;
  std::uint64_t truth_fingerprint = 0;
};
SimulationBundle load_simulation_bundle(const std::string& dir);

// iteration, logLik, logPrior, cost, nu summary per row.
void save_em_trace_csv(const std::string& path, const EmTrace& trace);
void save_em_trace_json(const std::string& path, const EmTrace& trace);

void save_eval_report_json(const std::string& path, const EvalReport& report,
                           const std::string& method);
void save_roc_csv(const std::string& path, const EvalReport& report);
void save_rmse_csv(const std::string& path, const EvalReport& report,
                   const std::vector<bool>& active_mask);

}  // namespace dynsolve
