#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dynsolve {

/// Per-time conditional moments of the source state. Time index t runs
/// 0..T; predicted quantities exist for t >= 1, smoother gains for t <= T-1,
/// lag covariances for t >= 1. Unused slots stay empty.
struct StateTrajectory {
  int p = 0;
  int n = 0;
  int T = 0;

  std::vector<Eigen::VectorXd> predicted_mean;  // beta_{t|t-1}
  std::vector<Eigen::MatrixXd> predicted_cov;   // V_{t|t-1}
  std::vector<Eigen::VectorXd> filtered_mean;   // beta_{t|t}; [0] = initial
  std::vector<Eigen::MatrixXd> filtered_cov;    // V_{t|t};    [0] = C0
  std::vector<Eigen::VectorXd> smoothed_mean;   // beta_{t|T}
  std::vector<Eigen::MatrixXd> smoothed_cov;    // V_{t|T}
  std::vector<Eigen::MatrixXd> smoother_gain;   // J_t, t = 0..T-1
  std::vector<Eigen::MatrixXd> lag_cov;         // V_{t,t-1|T}, t = 1..T

  // Innovations covariance factors from the forward pass: lower Cholesky of
  // X V_{t|t-1} X' + I, retained for the likelihood evaluation.
  std::vector<Eigen::MatrixXd> innovation_chol;

  bool has_filtered = false;
  bool has_smoothed = false;
  bool has_lag_cov = false;

  // Stacked accessors (row t), convenient for serialization and bindings.
  Eigen::MatrixXd filtered_means_matrix() const;   // (T+1) x p
  Eigen::MatrixXd predicted_means_matrix() const;  // T x p (t = 1..T)
  Eigen::MatrixXd smoothed_means_matrix() const;   // (T+1) x p

  // 2*sqrt(diag V_{t|T}) for t = 1..T, the 95% CI half-widths.
  Eigen::MatrixXd smoothed_ci_half_widths() const;  // T x p
};

}  // namespace dynsolve
