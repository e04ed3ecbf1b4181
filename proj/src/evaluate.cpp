#include "dynsolve/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dynsolve {

namespace {

std::uint64_t fnv1a_bytes(const unsigned char* data, size_t len,
                          std::uint64_t h = 14695981039346656037ULL) {
  for (size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::uint64_t matrix_fingerprint(const Eigen::MatrixXd& m) {
  std::uint64_t h = 14695981039346656037ULL;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      h = fnv1a_bytes(reinterpret_cast<const unsigned char*>(&v), sizeof(v), h);
    }
  }
  return h;
}

std::vector<double> default_threshold_grid(const Eigen::MatrixXd& estimates) {
  const double hi = estimates.cwiseAbs().maxCoeff();
  const double lo = 1e-6;
  std::vector<double> grid;
  grid.push_back(0.0);
  if (hi > lo) {
    const int k = 512;
    const double step = (std::log(hi) - std::log(lo)) / (k - 1);
    for (int i = 0; i < k; ++i) grid.push_back(std::exp(std::log(lo) + i * step));
  } else if (hi > 0.0) {
    grid.push_back(hi);
  }
  grid.push_back(std::numeric_limits<double>::infinity());
  return grid;
}

EvalReport roc_curve(const Eigen::MatrixXd& estimates,
                     const Eigen::MatrixXd& truth,
                     const std::vector<double>& thresholds) {
  if (estimates.rows() != truth.rows() || estimates.cols() != truth.cols()) {
    throw std::invalid_argument("roc_curve: shape mismatch");
  }
  const long active = (truth.array() != 0.0).count();
  const long inactive = truth.size() - active;
  if (active == 0 || inactive == 0) {
    throw ConfigError("roc_curve: degenerate truth (all zero or all nonzero)");
  }

  EvalReport report;
  report.truth_fingerprint = matrix_fingerprint(truth);

  const Eigen::ArrayXXd abs_est = estimates.array().abs();
  const auto active_mask = (truth.array() != 0.0);
  for (double c : thresholds) {
    const auto detected = abs_est > c;
    const long hits = (detected && active_mask).count();
    const long false_alarms = (detected && !active_mask).count();
    report.roc_points.push_back(
        {c, double(false_alarms) / double(inactive), double(hits) / double(active)});
  }
  std::sort(report.roc_points.begin(), report.roc_points.end(),
            [](const RocPoint& a, const RocPoint& b) {
              return a.threshold > b.threshold;
            });

  // trapezoid over (prFA, prD) with (0,0) and (1,1) appended
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  for (const auto& r : report.roc_points) pts.emplace_back(r.pr_fa, r.pr_d);
  pts.emplace_back(1.0, 1.0);
  std::sort(pts.begin(), pts.end());
  double auc = 0.0;
  for (size_t k = 1; k < pts.size(); ++k) {
    auc += (pts[k].first - pts[k - 1].first) *
           0.5 * (pts[k].second + pts[k - 1].second);
  }
  report.auc = auc;
  report.has_roc = true;
  return report;
}

double quantile(const Eigen::VectorXd& values, double q) {
  if (values.size() == 0) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0,1]");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double idx = q * (sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = static_cast<size_t>(std::ceil(idx));
  const double w = idx - lo;
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

EvalReport rmse(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& truth,
                const std::vector<bool>& active_mask) {
  if (estimates.rows() != truth.rows() || estimates.cols() != truth.cols()) {
    throw std::invalid_argument("rmse: shape mismatch");
  }
  const int T = static_cast<int>(estimates.rows());
  const int p = static_cast<int>(estimates.cols());
  if (T < 1) throw std::invalid_argument("rmse: T must be >= 1");
  if (static_cast<int>(active_mask.size()) != p) {
    throw std::invalid_argument("rmse: mask length mismatch");
  }

  EvalReport report;
  report.truth_fingerprint = matrix_fingerprint(truth);
  report.rmse_per_dipole =
      ((estimates - truth).array().square().colwise().sum() / T).sqrt();

  double inside_sum = 0.0;
  int inside_count = 0;
  std::vector<double> outside;
  for (int j = 0; j < p; ++j) {
    if (active_mask[j]) {
      inside_sum += report.rmse_per_dipole[j];
      ++inside_count;
    } else {
      outside.push_back(report.rmse_per_dipole[j]);
    }
  }
  report.inside_mean =
      inside_count > 0 ? inside_sum / inside_count
                       : std::numeric_limits<double>::quiet_NaN();
  if (!outside.empty()) {
    Eigen::VectorXd ov =
        Eigen::Map<Eigen::VectorXd>(outside.data(), outside.size());
    for (double q : {0.01, 0.25, 0.5, 0.75, 0.99}) {
      report.outside_quantiles[q] = quantile(ov, q);
    }
  }
  report.has_rmse = true;
  return report;
}

EvalReport evaluate_estimates(const Eigen::MatrixXd& estimates,
                              const Eigen::MatrixXd& truth,
                              const std::vector<bool>& active_mask) {
  EvalReport roc = roc_curve(estimates, truth, default_threshold_grid(estimates));
  EvalReport rm = rmse(estimates, truth, active_mask);
  roc.rmse_per_dipole = std::move(rm.rmse_per_dipole);
  roc.inside_mean = rm.inside_mean;
  roc.outside_quantiles = std::move(rm.outside_quantiles);
  roc.has_rmse = true;
  return roc;
}

MethodComparison compare_methods(
    const std::vector<std::pair<std::string, EvalReport>>& reports) {
  if (reports.size() < 2) {
    throw ConfigError("compare_methods: need at least two reports");
  }
  const std::uint64_t fp = reports.front().second.truth_fingerprint;
  for (const auto& [name, rep] : reports) {
    if (rep.truth_fingerprint != fp) {
      throw ConfigError("compare_methods: truth fingerprints differ (" + name + ")");
    }
  }

  MethodComparison cmp;
  cmp.quantile_levels = {0.5, 0.75, 0.99};
  for (const auto& [name, rep] : reports) cmp.auc[name] = rep.auc;

  for (const auto& [name, rep] : reports) cmp.auc_order.push_back(name);
  std::sort(cmp.auc_order.begin(), cmp.auc_order.end(),
            [&](const std::string& a, const std::string& b) {
              return cmp.auc.at(a) > cmp.auc.at(b);
            });

  for (const auto& [na, ra] : reports) {
    for (const auto& [nb, rb] : reports) {
      if (na == nb) continue;
      std::vector<double> red;
      for (double q : cmp.quantile_levels) {
        const double qa = ra.outside_quantiles.count(q) ? ra.outside_quantiles.at(q) : 0.0;
        const double qb = rb.outside_quantiles.count(q) ? rb.outside_quantiles.at(q) : 0.0;
        red.push_back(qb != 0.0 ? 100.0 * (1.0 - qa / qb) : 0.0);
      }
      cmp.reduction_pct[na][nb] = std::move(red);
    }
  }
  return cmp;
}

std::string format_comparison_table(const MethodComparison& cmp) {
  std::ostringstream os;
  os << "AUC ranking:";
  for (const auto& name : cmp.auc_order) {
    os << "  " << name << "=" << cmp.auc.at(name);
  }
  os << "\n\nOutside-patch RMSE quantile reduction (row vs column), %\n";
  const std::string& best = cmp.auc_order.front();
  os << "Method \\ Quantile";
  for (double q : cmp.quantile_levels) os << "\t" << q;
  os << "\n";
  for (const auto& [other, red] : cmp.reduction_pct.at(best)) {
    os << best << " vs " << other;
    for (double r : red) {
      os << "\t";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.1f", r);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace dynsolve
