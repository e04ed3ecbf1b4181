#pragma once

#include <Eigen/Dense>

#include "dynsolve/feedback.hpp"

namespace dynsolve {

// Unique solution of C = A C A' + Q for stable A (spectral radius < 1),
// computed by the squaring iteration. Q must be symmetric PSD.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& q);

// Steady-state source covariance: solves C = (phi F) C (phi F)' + q.
Eigen::MatrixXd steady_state_covariance(const FeedbackMatrix& feedback,
                                        const Eigen::MatrixXd& q);

struct PerturbationBound {
  double lhs = 0.0;  // ||C_perturbed - C||_2
  double rhs = 0.0;  // 4 ||C_perturbed||_2 / (1 - ||F||_2^2) * ||dF||_2
};

// Compares the steady-state covariance shift against its norm bound. `f` is
// the already-phi-folded transition matrix; lhs < rhs whenever ||f||_2 < 1
// and delta_f != 0.
PerturbationBound perturbation_bound_check(const Eigen::MatrixXd& f,
                                           const Eigen::MatrixXd& q,
                                           const Eigen::MatrixXd& delta_f);

PerturbationBound perturbation_bound_check(const FeedbackMatrix& feedback,
                                           const Eigen::MatrixXd& q,
                                           const Eigen::MatrixXd& delta_f);

}  // namespace dynsolve
