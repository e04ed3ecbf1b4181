#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dynsolve/graph.hpp"

namespace dynsolve {

struct SimulationConfig {
  std::vector<int> patch_indices;  // active nodes on the fine graph
  double waveform_freq_hz = 10.0;
  double sample_rate_hz = 200.0;
  double duration_s = 1.0;
  double target_snr = 5.0;  // power SNR; >= kNoiselessSnrCap means no noise
  int refinement_factor = 4;
  std::uint64_t rng_seed = 0;

  int num_samples() const;
  void validate() const;
};

inline constexpr double kNoiselessSnrCap = 1e6;

struct SimulationOutput {
  Eigen::MatrixXd observations;         // T x n, whitened units
  Eigen::MatrixXd true_coarse_sources;  // T x p_coarse, nAm
  std::vector<bool> active_mask;        // p_coarse
  double achieved_snr = 0.0;
};

// Sinusoidal patch activity on the fine graph, projected through the fine
// lead field with noise calibrated to the target power SNR. Truth is
// aggregated onto the coarse graph by nearest-coarse-node summation.
// Refuses to run when fine and coarse are the same discretization.
SimulationOutput simulate_patch(const SourceGraph& fine_graph,
                                const Eigen::MatrixXd& fine_lead_field,
                                const SourceGraph& coarse_graph,
                                const SimulationConfig& config);

// Synthetic gain matrix: sensors drawn on a sphere of radius 1.2x the
// maximal source radius; gains decay as 1/r^2, modulated by the projection
// of a random per-source unit orientation onto the source->sensor
// direction. Deterministic per seed.
Eigen::MatrixXd synth_lead_field(const SourceGraph& graph, int n_sensors,
                                 std::uint64_t seed);

struct LeadFieldPair {
  Eigen::MatrixXd coarse;  // n x p_coarse
  Eigen::MatrixXd fine;    // n x p_fine
  Eigen::MatrixX3d sensors;
};

/// Directed sensor array: a golden-spiral cap of the given half-angle around
/// `aim` (jittered per seed), mimicking a partial helmet over the region of
/// interest. Without it, sensor directions are drawn isotropically.
struct HelmetSpec {
  Eigen::RowVector3d aim;
  double half_angle_rad = 0.6;
};

// Same sensor array observing both discretizations.
LeadFieldPair synth_lead_field_pair(const SourceGraph& coarse_graph,
                                    const SourceGraph& fine_graph,
                                    int n_sensors, std::uint64_t seed,
                                    const std::optional<HelmetSpec>& helmet = {});

struct WhitenedData {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd lead_field;
};

// Premultiplies data and lead field by the symmetric inverse square root of
// the sensor-noise covariance.
WhitenedData whiten(const Eigen::MatrixXd& raw_observations,
                    const Eigen::MatrixXd& raw_lead_field,
                    const Eigen::MatrixXd& noise_cov);

// For each fine node, index of the nearest coarse node (Euclidean).
std::vector<int> nearest_coarse_map(const SourceGraph& fine_graph,
                                    const SourceGraph& coarse_graph);

}  // namespace dynsolve
