#include "dynsolve/kalman.hpp"

#include <cmath>

#include "dynsolve/common.hpp"

namespace dynsolve {

namespace {

inline void symmetrize(Eigen::MatrixXd& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

// Cheap conditioning guard: diagonal entries of a covariance must stay
// finite and nonnegative up to roundoff.
void check_cov_health(const Eigen::MatrixXd& v, const char* what) {
  const auto diag = v.diagonal().array();
  if (!diag.isFinite().all()) {
    throw NumericalError(std::string(what) + ": covariance has non-finite entries");
  }
  const double scale = std::max(1.0, diag.abs().maxCoeff());
  if (diag.minCoeff() < -1e-9 * scale) {
    throw NumericalError(std::string(what) +
                         ": covariance lost positive semidefiniteness");
  }
}

// phi^2 F V F' + (1 - phi^2) Q, exploiting the sparsity of F.
Eigen::MatrixXd propagate_cov(const FeedbackMatrix& fb,
                              const Eigen::MatrixXd& v,
                              const Eigen::VectorXd& q_diag) {
  const double phi = fb.phi;
  Eigen::MatrixXd out;
  if (phi == 0.0) {
    out = Eigen::MatrixXd(q_diag.asDiagonal());
    return out;
  }
  const Eigen::MatrixXd fv = fb.entries * v;
  out = phi * phi * (fb.entries * fv.transpose());  // F V F' for symmetric V
  out.diagonal() += (1.0 - phi * phi) * q_diag;
  symmetrize(out);
  return out;
}

}  // namespace

StateTrajectory kalman_filter(const ModelSpec& model,
                              const Eigen::MatrixXd& observations) {
  model.validate();
  const int n = model.num_sensors();
  const int p = model.num_sources();
  const int T = static_cast<int>(observations.rows());
  if (static_cast<int>(observations.cols()) != n) {
    throw std::invalid_argument("observations must be T x n");
  }
  if (T < 1) throw std::invalid_argument("need at least one observation");
  if (!observations.allFinite()) {
    throw std::invalid_argument("non-finite observation");
  }

  const Eigen::MatrixXd& x = model.lead_field;
  const Eigen::VectorXd q_diag = model.noise.q_diagonal();
  const double phi = model.feedback.phi;

  StateTrajectory traj;
  traj.p = p;
  traj.n = n;
  traj.T = T;
  traj.predicted_mean.resize(T + 1);
  traj.predicted_cov.resize(T + 1);
  traj.filtered_mean.resize(T + 1);
  traj.filtered_cov.resize(T + 1);
  traj.innovation_chol.resize(T + 1);

  traj.filtered_mean[0] = Eigen::VectorXd::Zero(p);
  traj.filtered_cov[0] = model.c0;

  for (int t = 1; t <= T; ++t) {
    // prediction
    traj.predicted_mean[t] =
        phi * (model.feedback.entries * traj.filtered_mean[t - 1]);
    traj.predicted_cov[t] =
        propagate_cov(model.feedback, traj.filtered_cov[t - 1], q_diag);
    check_cov_health(traj.predicted_cov[t], "kalman_filter predicted");

    // innovation covariance S = X V X' + I, factorized once (n x n)
    const Eigen::MatrixXd xv = x * traj.predicted_cov[t];  // n x p
    Eigen::MatrixXd s = xv * x.transpose();
    s.diagonal().array() += 1.0;
    symmetrize(s);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("kalman_filter: innovation covariance not SPD");
    }
    traj.innovation_chol[t] = llt.matrixL();

    // gain G = V X' S^{-1}; computed as (S^{-1} X V)'
    const Eigen::MatrixXd gain_t = llt.solve(xv);  // n x p
    const Eigen::VectorXd residual =
        observations.row(t - 1).transpose() - x * traj.predicted_mean[t];

    traj.filtered_mean[t] =
        traj.predicted_mean[t] + gain_t.transpose() * residual;
    traj.filtered_cov[t] =
        traj.predicted_cov[t] - gain_t.transpose() * xv;
    symmetrize(traj.filtered_cov[t]);
    check_cov_health(traj.filtered_cov[t], "kalman_filter filtered");
  }

  traj.has_filtered = true;
  return traj;
}

void fixed_interval_smoother(const ModelSpec& model, StateTrajectory& traj) {
  if (!traj.has_filtered) {
    throw ConfigError("fixed_interval_smoother: run kalman_filter first");
  }
  const int p = traj.p;
  const int T = traj.T;
  const double phi = model.feedback.phi;

  traj.smoothed_mean.assign(T + 1, {});
  traj.smoothed_cov.assign(T + 1, {});
  traj.smoother_gain.assign(std::max(T, 0), {});

  traj.smoothed_mean[T] = traj.filtered_mean[T];
  traj.smoothed_cov[T] = traj.filtered_cov[T];

  for (int t = T - 1; t >= 0; --t) {
    Eigen::MatrixXd j_t;
    if (phi == 0.0) {
      j_t = Eigen::MatrixXd::Zero(p, p);
    } else {
      // J_t = phi V_{t|t} F' V_{t+1|t}^{-1}, via the solve
      // V_{t+1|t} J_t' = phi F V_{t|t}
      Eigen::MatrixXd rhs = phi * (model.feedback.entries * traj.filtered_cov[t]);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(traj.predicted_cov[t + 1]);
      bool ok = (ldlt.info() == Eigen::Success && ldlt.isPositive());
      Eigen::MatrixXd jt_t;
      if (ok) {
        jt_t = ldlt.solve(rhs);
        ok = jt_t.allFinite();
      }
      if (!ok) {
        // one round of diagonal jitter, then give up
        Eigen::MatrixXd vp = traj.predicted_cov[t + 1];
        vp.diagonal().array() += 1e-10 * vp.diagonal().mean();
        Eigen::LDLT<Eigen::MatrixXd> retry(vp);
        if (retry.info() != Eigen::Success) {
          throw NumericalError(
              "fixed_interval_smoother: singular predicted covariance");
        }
        jt_t = retry.solve(rhs);
        if (!jt_t.allFinite()) {
          throw NumericalError(
              "fixed_interval_smoother: singular predicted covariance");
        }
      }
      j_t = jt_t.transpose();
    }

    traj.smoothed_mean[t] =
        traj.filtered_mean[t] +
        j_t * (traj.smoothed_mean[t + 1] - traj.predicted_mean[t + 1]);
    traj.smoothed_cov[t] =
        traj.filtered_cov[t] +
        j_t * (traj.smoothed_cov[t + 1] - traj.predicted_cov[t + 1]) *
            j_t.transpose();
    symmetrize(traj.smoothed_cov[t]);
    check_cov_health(traj.smoothed_cov[t], "fixed_interval_smoother");
    traj.smoother_gain[t] = std::move(j_t);
  }

  traj.has_smoothed = true;
}

void lag_covariance(StateTrajectory& traj) {
  if (!traj.has_smoothed || traj.smoother_gain.empty()) {
    throw ConfigError("lag_covariance: smoother gains unavailable");
  }
  const int T = traj.T;
  traj.lag_cov.assign(T + 1, {});
  for (int t = 1; t <= T; ++t) {
    traj.lag_cov[t] = traj.smoothed_cov[t] * traj.smoother_gain[t - 1].transpose();
  }
  traj.has_lag_cov = true;
}

Eigen::VectorXd penalized_ls_solve(const Eigen::VectorXd& prior_mean,
                                   const Eigen::MatrixXd& prior_cov,
                                   const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (prior_mean.size() != p || prior_cov.rows() != p || prior_cov.cols() != p ||
      y.size() != n) {
    throw std::invalid_argument("penalized_ls_solve: dimension mismatch");
  }
  const Eigen::MatrixXd xv = x * prior_cov;  // n x p
  Eigen::MatrixXd s = xv * x.transpose();
  s.diagonal().array() += 1.0;
  s = (0.5 * (s + s.transpose())).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("penalized_ls_solve: X V X' + I not SPD");
  }
  return prior_mean + xv.transpose() * llt.solve(y - x * prior_mean);
}

}  // namespace dynsolve
