#pragma once

#include <Eigen/Dense>

#include "dynsolve/model.hpp"
#include "dynsolve/trajectory.hpp"

namespace dynsolve {

// Forward pass. Observations are stored one time step per row (T x n).
// Starts from beta_{0|0} = 0, V_{0|0} = C0; only n x n systems are ever
// factorized. Throws std::invalid_argument on non-finite data and
// NumericalError if a covariance loses positive semidefiniteness.
StateTrajectory kalman_filter(const ModelSpec& model,
                              const Eigen::MatrixXd& observations);

// Backward (Rauch-Tung-Striebel) pass; fills smoothed fields and gains
// in place. Near-singular predicted covariances get one shot of diagonal
// jitter (1e-10 * mean diag) before a NumericalError is raised.
void fixed_interval_smoother(const ModelSpec& model, StateTrajectory& traj);

// V_{t,t-1|T} = V_{t|T} J_{t-1}' for t = 1..T; requires the smoother gains.
void lag_covariance(StateTrajectory& traj);

// Minimizer of ||y - X b||^2 + ||b - mu||^2_{V^{-1}}:
//   mu + V X' (X V X' + I)^{-1} (y - X mu).
// The single algebraic form behind the MNE, KF update, and FIS estimates.
Eigen::VectorXd penalized_ls_solve(const Eigen::VectorXd& prior_mean,
                                   const Eigen::MatrixXd& prior_cov,
                                   const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y);

}  // namespace dynsolve
