#include "dynsolve/mne.hpp"

#include <cmath>

namespace dynsolve {

MneResult mne_estimate(const MneSpec& spec, const Eigen::MatrixXd& observations) {
  const int n = static_cast<int>(spec.lead_field.rows());
  const int p = static_cast<int>(spec.lead_field.cols());
  if (spec.prior_cov.rows() != p || spec.prior_cov.cols() != p) {
    throw std::invalid_argument("mne_estimate: prior covariance must be p x p");
  }
  if (static_cast<int>(observations.cols()) != n) {
    throw std::invalid_argument("mne_estimate: observations must be T x n");
  }
  const int T = static_cast<int>(observations.rows());

  const Eigen::MatrixXd xc = spec.lead_field * spec.prior_cov;  // n x p
  Eigen::MatrixXd s = xc * spec.lead_field.transpose();
  s.diagonal().array() += 1.0;
  s = (0.5 * (s + s.transpose())).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("mne_estimate: X C X' + I not SPD");
  }

  MneResult result;
  // beta_t' = y_t' S^{-1} X C, all time steps at once
  result.means = llt.solve(observations.transpose()).transpose() * xc;
  result.posterior_cov = spec.prior_cov - xc.transpose() * llt.solve(xc);
  result.posterior_cov =
      (0.5 * (result.posterior_cov + result.posterior_cov.transpose())).eval();
  result.ci_half_width =
      2.0 * result.posterior_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

}  // namespace dynsolve
