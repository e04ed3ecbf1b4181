#pragma once

#include <Eigen/Dense>

#include "dynsolve/common.hpp"

namespace dynsolve {

struct MneSpec {
  Eigen::MatrixXd prior_cov;   // p x p symmetric PSD
  Eigen::MatrixXd lead_field;  // n x p
};

struct MneResult {
  Eigen::MatrixXd means;          // T x p, beta_t = C X'(X C X' + I)^{-1} y_t
  Eigen::MatrixXd posterior_cov;  // p x p, time-invariant
  Eigen::VectorXd ci_half_width;  // 2 sqrt(diag posterior_cov)
};

// L2 minimum-norm estimate, independently per time step.
MneResult mne_estimate(const MneSpec& spec, const Eigen::MatrixXd& observations);

}  // namespace dynsolve
