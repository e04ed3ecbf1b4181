#include "dynsolve/feedback.hpp"

#include <cmath>
#include <vector>

#include "dynsolve/common.hpp"

namespace dynsolve {

FeedbackMatrix build_feedback_matrix(const SourceGraph& graph, double phi) {
  if (!(phi >= 0.0 && phi < 1.0)) {
    throw std::invalid_argument("phi must lie in [0, 1)");
  }
  graph.validate();
  const int p = graph.num_nodes();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(p) * 8);
  for (int i = 0; i < p; ++i) {
    const auto& nbrs = graph.neighbors[i];
    if (nbrs.empty()) {
      triplets.emplace_back(i, i, 1.0);  // isolated node keeps unit mass
      continue;
    }
    double inv_sum = 0.0;
    for (double d : graph.distances[i]) inv_sum += 1.0 / d;
    // neighbor mass 1/2 split inversely proportional to distance,
    // self weight 1/2, row total 1
    triplets.emplace_back(i, i, 0.5);
    for (size_t k = 0; k < nbrs.size(); ++k) {
      const double w = 0.5 * (1.0 / graph.distances[i][k]) / inv_sum;
      triplets.emplace_back(i, nbrs[k], w);
    }
  }

  FeedbackMatrix fb;
  fb.phi = phi;
  fb.entries.resize(p, p);
  fb.entries.setFromTriplets(triplets.begin(), triplets.end());
  fb.entries.makeCompressed();
  return fb;
}

double spectral_radius(const Eigen::SparseMatrix<double>& m, int max_iters,
                       double tol) {
  const int p = static_cast<int>(m.rows());
  if (p == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(p, 1.0 / std::sqrt(double(p)));
  double rho = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double prev = rho;
    rho = norm;
    v = w / norm;
    if (it > 0 && std::abs(rho - prev) < tol * std::max(1.0, rho)) break;
  }
  return rho;
}

void validate_feedback(const FeedbackMatrix& feedback, const SourceGraph& graph) {
  const int p = graph.num_nodes();
  if (feedback.size() != p) {
    throw ConfigError("feedback matrix size does not match graph");
  }
  if (!(feedback.phi >= 0.0 && feedback.phi < 1.0)) {
    throw ConfigError("feedback phi outside [0, 1)");
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows = feedback.entries;
  for (int i = 0; i < p; ++i) {
    double diag = 0.0;
    double off = 0.0;
    int nnz_off = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, i);
         it; ++it) {
      const int j = static_cast<int>(it.col());
      if (j == i) {
        diag = it.value();
      } else {
        const auto& nbrs = graph.neighbors[i];
        if (std::find(nbrs.begin(), nbrs.end(), j) == nbrs.end()) {
          throw ConfigError("feedback entry outside neighbor pattern at row " +
                            std::to_string(i));
        }
        off += it.value();
        ++nnz_off;
      }
    }
    if (graph.neighbors[i].empty()) {
      if (std::abs(diag - 1.0) > 1e-12 || nnz_off != 0) {
        throw ConfigError("isolated row must be the unit self-weight");
      }
      continue;
    }
    if (nnz_off != static_cast<int>(graph.neighbors[i].size())) {
      throw ConfigError("feedback row misses neighbor entries at row " +
                        std::to_string(i));
    }
    if (std::abs(off - diag) > 1e-12) {
      throw ConfigError("neighbor mass != self weight at row " +
                        std::to_string(i));
    }
    if (std::abs(diag + off - 1.0) > 1e-12) {
      throw ConfigError("row sum != 1 at row " + std::to_string(i));
    }
  }
  Eigen::SparseMatrix<double> folded = feedback.phi * feedback.entries;
  if (!(spectral_radius(folded) < 1.0)) {
    throw NumericalError("spectral radius of phi*F is not < 1");
  }
}

}  // namespace dynsolve
