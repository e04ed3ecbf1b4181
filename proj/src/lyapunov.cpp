#include "dynsolve/lyapunov.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dynsolve/common.hpp"

namespace dynsolve {

namespace {

void require_stable(const Eigen::MatrixXd& a, const char* who) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": eigenvalue computation failed");
  }
  if (es.eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
    throw NumericalError(std::string(who) + ": transition matrix is unstable");
  }
}

void require_sym_psd(const Eigen::MatrixXd& q, const char* who) {
  if (q.rows() != q.cols()) {
    throw std::invalid_argument(std::string(who) + ": Q must be square");
  }
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument(std::string(who) + ": Q must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw std::invalid_argument(std::string(who) +
                                ": Q must be positive semidefinite");
  }
}

}  // namespace

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& q) {
  if (a.rows() != a.cols() || a.rows() != q.rows()) {
    throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
  }
  require_sym_psd(q, "solve_discrete_lyapunov");
  require_stable(a, "solve_discrete_lyapunov");

  // Squaring iteration: after k rounds C = sum_{j<2^k} A^j Q A'^j.
  Eigen::MatrixXd c = q;
  Eigen::MatrixXd pk = a;
  const double qscale = std::max(1e-300, q.cwiseAbs().maxCoeff());
  for (int k = 0; k < 128; ++k) {
    Eigen::MatrixXd next = c + pk * c * pk.transpose();
    pk = (pk * pk).eval();
    const double delta = (next - c).cwiseAbs().maxCoeff();
    c = std::move(next);
    if (!c.allFinite()) {
      throw NumericalError("solve_discrete_lyapunov: iteration diverged");
    }
    if (delta <= 1e-15 * std::max(qscale, c.cwiseAbs().maxCoeff())) break;
  }
  c = 0.5 * (c + c.transpose()).eval();
  return c;
}

Eigen::MatrixXd steady_state_covariance(const FeedbackMatrix& feedback,
                                        const Eigen::MatrixXd& q) {
  return solve_discrete_lyapunov(feedback.folded_dense(), q);
}

PerturbationBound perturbation_bound_check(const Eigen::MatrixXd& f,
                                           const Eigen::MatrixXd& q,
                                           const Eigen::MatrixXd& delta_f) {
  const Eigen::MatrixXd f_tilde = f + delta_f;
  const Eigen::MatrixXd c = solve_discrete_lyapunov(f, q);
  const Eigen::MatrixXd c_tilde = solve_discrete_lyapunov(f_tilde, q);

  const double lhs = (c_tilde - c).operatorNorm();
  const double f_norm = f.operatorNorm();
  const double rhs = 4.0 * c_tilde.operatorNorm() /
                     (1.0 - f_norm * f_norm) * delta_f.operatorNorm();
  return {lhs, rhs};
}

PerturbationBound perturbation_bound_check(const FeedbackMatrix& feedback,
                                           const Eigen::MatrixXd& q,
                                           const Eigen::MatrixXd& delta_f) {
  return perturbation_bound_check(feedback.folded_dense(), q, delta_f);
}

}  // namespace dynsolve
