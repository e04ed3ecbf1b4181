#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dynsolve/graph.hpp"

namespace dynsolve {

/// Sparse nearest-neighbor feedback matrix. `entries` keeps the row-sum-1
/// normalization; phi is folded in only where products are formed, so the
/// effective transition matrix is phi * entries.
struct FeedbackMatrix {
  Eigen::SparseMatrix<double> entries;  // p x p
  double phi = 0.0;

  int size() const { return static_cast<int>(entries.rows()); }
  Eigen::MatrixXd folded_dense() const { return phi * Eigen::MatrixXd(entries); }
};

// Inverse-distance neighbor weights normalized so that the neighbor mass
// equals the self weight and each row sums to one (f_ii = 1/2 for any node
// with neighbors; isolated nodes get f_ii = 1).
FeedbackMatrix build_feedback_matrix(const SourceGraph& graph, double phi);

// Largest |eigenvalue| estimate by power iteration.
double spectral_radius(const Eigen::SparseMatrix<double>& m,
                       int max_iters = 200, double tol = 1e-10);

// Checks sparsity pattern against the graph, the two row-normalization
// constraints (1e-12), and spectral_radius(phi*F) < 1.
void validate_feedback(const FeedbackMatrix& feedback, const SourceGraph& graph);

}  // namespace dynsolve
