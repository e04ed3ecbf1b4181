#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynsolve/common.hpp"

namespace dynsolve {

struct RocPoint {
  double threshold = 0.0;
  double pr_fa = 0.0;
  double pr_d = 0.0;
};

struct EvalReport {
  std::vector<RocPoint> roc_points;  // sorted by descending threshold
  double auc = 0.0;
  Eigen::VectorXd rmse_per_dipole;                      // p
  double inside_mean = 0.0;                             // mean RMSE on the patch
  std::map<double, double> outside_quantiles;           // q -> RMSE quantile
  Eigen::MatrixXd ci_half_widths;  // T x p, 2 sqrt(diag V_{t|T}) when available
  std::uint64_t truth_fingerprint = 0;
  bool has_roc = false;
  bool has_rmse = false;
};

// 512 log-spaced thresholds between 1e-6 and max|estimate|, plus 0 and +inf.
std::vector<double> default_threshold_grid(const Eigen::MatrixXd& estimates);

// Detection / false-alarm proportions over all (dipole, time) cells:
// active means |estimate| > c, truth-active means truth != 0. Throws
// ConfigError when the truth is all-zero or all-nonzero.
EvalReport roc_curve(const Eigen::MatrixXd& estimates,
                     const Eigen::MatrixXd& truth,
                     const std::vector<double>& thresholds);

// Per-dipole RMSE over time with inside-mask mean and outside-mask
// quantiles at {0.01, 0.25, 0.5, 0.75, 0.99} (linear interpolation).
EvalReport rmse(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& truth,
                const std::vector<bool>& active_mask);

// ROC + RMSE in one report.
EvalReport evaluate_estimates(const Eigen::MatrixXd& estimates,
                              const Eigen::MatrixXd& truth,
                              const std::vector<bool>& active_mask);

// Linear-interpolation quantile of a sample vector.
double quantile(const Eigen::VectorXd& values, double q);

// FNV-1a over the row-major little-endian bytes; ties estimates to the
// truth they were scored against.
std::uint64_t matrix_fingerprint(const Eigen::MatrixXd& m);

struct MethodComparison {
  std::vector<std::string> auc_order;  // descending AUC
  std::map<std::string, double> auc;
  std::vector<double> quantile_levels;
  // reduction_pct[a][b][k]: percent reduction of method a's outside-RMSE
  // quantile_levels[k] relative to method b (positive: a is smaller).
  std::map<std::string, std::map<std::string, std::vector<double>>> reduction_pct;
};

MethodComparison compare_methods(
    const std::vector<std::pair<std::string, EvalReport>>& reports);

std::string format_comparison_table(const MethodComparison& cmp);

}  // namespace dynsolve
