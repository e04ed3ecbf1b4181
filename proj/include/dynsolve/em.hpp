#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dynsolve/kalman.hpp"

namespace dynsolve {

/// E-step accumulators. diag_a always holds diag(A); the full matrices are
/// materialized only for p <= kFullStatsMaxDim (test scale), since the
/// M-step needs diagonals alone.
struct EStepStats {
  Eigen::VectorXd diag_a;
  Eigen::MatrixXd a1, a2, a3, a;
  bool full = false;
  double b_trace = 0.0;  // trace of the measurement-residual accumulator
};

inline constexpr int kFullStatsMaxDim = 512;

struct EStepResult {
  EStepStats stats;
  StateTrajectory trajectory;
};

// full_stats_max_dim caps the size at which the full accumulators are
// materialized; beyond it the diagonals stream over t.
EStepResult e_step(const ModelSpec& model, const Eigen::MatrixXd& observations,
                   int full_stats_max_dim = kFullStatsMaxDim);

// Closed-form maximizer of the per-coordinate objective:
//   nu_j = (a_jj * lambda tr(Sigma_hat) / (1 - phi^2) + 2b) / (T + 2b).
Eigen::VectorXd m_step(const EStepStats& stats, const ModelSpec& model, int T);

// Innovations-form log likelihood
//   -(nT/2) log 2pi - 1/2 sum log|S_t| - 1/2 sum r_t' S_t^{-1} r_t,
// with S_t = X V_{t|t-1} X' + I and r_t the one-step prediction residual.
// Reuses the Cholesky factors retained by kalman_filter when present.
double innovations_log_likelihood(const ModelSpec& model,
                                  const StateTrajectory& traj,
                                  const Eigen::MatrixXd& observations);

struct EmIterate {
  Eigen::VectorXd nu;
  double log_lik = 0.0;
  double log_prior = 0.0;
  double cost = 0.0;  // log_lik + log_prior (log posterior sans evidence)
};

struct EmTrace {
  std::vector<EmIterate> iterates;
  bool converged = false;
  int iterations = 0;
};

struct EmConfig {
  int max_iters = 30;
  double rel_tol = 1e-5;
  // C0 <- V_{0|T} each iteration. The heuristic sits outside the EM
  // monotonicity guarantee; switch off for strict monotonicity checks.
  bool update_c0 = true;
};

struct EmResult {
  StateTrajectory trajectory;  // smoothed fields at the final iterate
  Eigen::VectorXd nu_map;
  EmTrace trace;
};

// dMAP-EM driver: nu^(0) = 1, C0 = (lambda tr(Sigma_hat))^{-1} I, then
// E/M steps until the cost's relative change drops below rel_tol or
// max_iters is hit. A cost decrease beyond 1e-9*|cost| raises
// NumericalError: it indicates an implementation bug, not a data condition.
EmResult dmap_em(const ModelSpec& model, const Eigen::MatrixXd& observations,
                 const EmConfig& config);

// Static baseline: same driver with phi = 0 (temporal coupling removed).
EmResult smap_em(const ModelSpec& model, const Eigen::MatrixXd& observations,
                 const EmConfig& config);

}  // namespace dynsolve
