#pragma once

#include <Eigen/Dense>

#include "dynsolve/feedback.hpp"

namespace dynsolve {

/// Diagonal state-noise covariance Q(nu) = diag(nu) / (lambda * tr(Sigma_hat)),
/// with lambda the inverse power SNR and tr(Sigma_hat) = tr(X'X)/n.
struct NoiseModel {
  double lambda = 0.2;
  double tr_sigma_hat = 1.0;
  Eigen::VectorXd nu;  // p, all > 0

  double scale() const { return lambda * tr_sigma_hat; }
  Eigen::VectorXd q_diagonal() const { return nu / scale(); }
};

// Dense diagonal Q(nu); throws std::invalid_argument on nonpositive inputs.
Eigen::MatrixXd build_state_noise_cov(const NoiseModel& noise);

/// Inverse-gamma prior on each nu_j with shape b-1 and scale b; mode is 1
/// for any b > 0 and the variance b^2/((b-2)^2 (b-3)) blows up as b -> 3+.
struct PriorSpec {
  double b = 3.1;
};

// nu-dependent part of log Pr(nu): sum_j (-b log nu_j - b / nu_j).
double prior_log_density(const Eigen::VectorXd& nu, const PriorSpec& prior);

// b^2 / ((b-2)^2 (b-3)); requires b > 3.
double prior_variance(const PriorSpec& prior);

struct ModelSpec {
  Eigen::MatrixXd lead_field;  // n x p, whitened
  FeedbackMatrix feedback;
  NoiseModel noise;
  PriorSpec prior;
  Eigen::MatrixXd c0;  // p x p SPD

  int num_sensors() const { return static_cast<int>(lead_field.rows()); }
  int num_sources() const { return static_cast<int>(lead_field.cols()); }

  void validate() const;
};

// Assembles a ModelSpec with nu = 1 and C0 = (lambda tr(Sigma_hat))^{-1} I,
// the standard initialization. power_snr = E||X beta||^2 / E||eps||^2 = 1/lambda.
ModelSpec make_model_spec(const Eigen::MatrixXd& lead_field,
                          const SourceGraph& graph, double phi,
                          double power_snr, double b = 3.1);

}  // namespace dynsolve
