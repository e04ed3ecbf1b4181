#include "dynsolve/trajectory.hpp"

#include <cmath>

#include "dynsolve/common.hpp"

namespace dynsolve {

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vs, int first,
                           int p) {
  const int count = static_cast<int>(vs.size()) - first;
  Eigen::MatrixXd m(count, p);
  for (int k = 0; k < count; ++k) m.row(k) = vs[first + k].transpose();
  return m;
}

}  // namespace

Eigen::MatrixXd StateTrajectory::filtered_means_matrix() const {
  if (!has_filtered) throw ConfigError("trajectory: filtered fields absent");
  return stack_rows(filtered_mean, 0, p);
}

Eigen::MatrixXd StateTrajectory::predicted_means_matrix() const {
  if (!has_filtered) throw ConfigError("trajectory: forward fields absent");
  return stack_rows(predicted_mean, 1, p);
}

Eigen::MatrixXd StateTrajectory::smoothed_means_matrix() const {
  if (!has_smoothed) throw ConfigError("trajectory: smoothed fields absent");
  return stack_rows(smoothed_mean, 0, p);
}

Eigen::MatrixXd StateTrajectory::smoothed_ci_half_widths() const {
  if (!has_smoothed) throw ConfigError("trajectory: smoothed fields absent");
  Eigen::MatrixXd ci(T, p);
  for (int t = 1; t <= T; ++t) {
    ci.row(t - 1) =
        2.0 * smoothed_cov[t].diagonal().cwiseMax(0.0).cwiseSqrt().transpose();
  }
  return ci;
}

}  // namespace dynsolve
