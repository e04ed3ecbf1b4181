#include "dynsolve/model.hpp"

#include <cmath>

#include "dynsolve/common.hpp"

namespace dynsolve {

Eigen::MatrixXd build_state_noise_cov(const NoiseModel& noise) {
  if (!(noise.lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (!(noise.tr_sigma_hat > 0.0)) {
    throw std::invalid_argument("tr(Sigma_hat) must be > 0");
  }
  if (noise.nu.size() == 0 || (noise.nu.array() <= 0.0).any()) {
    throw std::invalid_argument("all nu_i must be > 0");
  }
  return noise.q_diagonal().asDiagonal();
}

double prior_log_density(const Eigen::VectorXd& nu, const PriorSpec& prior) {
  if ((nu.array() <= 0.0).any()) {
    throw std::invalid_argument("prior_log_density: nu must be positive");
  }
  const double b = prior.b;
  return (-b * nu.array().log() - b / nu.array()).sum();
}

double prior_variance(const PriorSpec& prior) {
  const double b = prior.b;
  if (!(b > 3.0)) throw std::invalid_argument("prior variance requires b > 3");
  return b * b / ((b - 2.0) * (b - 2.0) * (b - 3.0));
}

void ModelSpec::validate() const {
  const int n = num_sensors();
  const int p = num_sources();
  if (n < 1 || p < 1) throw ConfigError("model: empty lead field");
  if (feedback.size() != p) {
    throw ConfigError("model: feedback size does not match lead field");
  }
  if (noise.nu.size() != p) {
    throw ConfigError("model: nu length does not match lead field");
  }
  if (!(noise.lambda > 0.0) || !(noise.tr_sigma_hat > 0.0) ||
      (noise.nu.array() <= 0.0).any()) {
    throw ConfigError("model: invalid noise parameters");
  }
  if (!(prior.b > 3.0)) throw ConfigError("model: prior requires b > 3");
  if (c0.rows() != p || c0.cols() != p) {
    throw ConfigError("model: C0 dimension mismatch");
  }
  const double scale = c0.cwiseAbs().maxCoeff();
  if ((c0 - c0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, scale)) {
    throw ConfigError("model: C0 not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(c0);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("model: C0 not positive definite");
  }
}

ModelSpec make_model_spec(const Eigen::MatrixXd& lead_field,
                          const SourceGraph& graph, double phi,
                          double power_snr, double b) {
  if (!(power_snr > 0.0)) {
    throw std::invalid_argument("power SNR must be > 0");
  }
  const int n = static_cast<int>(lead_field.rows());
  const int p = static_cast<int>(lead_field.cols());
  if (p != graph.num_nodes()) {
    throw ConfigError("lead field columns do not match graph nodes");
  }

  ModelSpec model;
  model.lead_field = lead_field;
  model.feedback = build_feedback_matrix(graph, phi);
  model.noise.lambda = 1.0 / power_snr;
  model.noise.tr_sigma_hat = lead_field.squaredNorm() / n;  // tr(X'X)/n
  model.noise.nu = Eigen::VectorXd::Ones(p);
  model.prior.b = b;
  model.c0 =
      Eigen::MatrixXd::Identity(p, p) / (model.noise.lambda * model.noise.tr_sigma_hat);
  model.validate();
  return model;
}

}  // namespace dynsolve
