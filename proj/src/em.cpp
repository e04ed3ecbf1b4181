#include "dynsolve/em.hpp"

#include <cmath>

#include "dynsolve/common.hpp"

namespace dynsolve {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// diag(F M F')_i = f_i' M f_i over the sparse row pattern of F.
Eigen::VectorXd diag_sparse_quadratic(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& f_rows,
    const Eigen::MatrixXd& m) {
  const int p = static_cast<int>(f_rows.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < p; ++i) {
    double acc = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(f_rows, i);
         it; ++it) {
      double inner = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator jt(f_rows,
                                                                          i);
           jt; ++jt) {
        inner += jt.value() * m(it.col(), jt.col());
      }
      acc += it.value() * inner;
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace

EStepResult e_step(const ModelSpec& model, const Eigen::MatrixXd& observations,
                   int full_stats_max_dim) {
  EStepResult result;
  result.trajectory = kalman_filter(model, observations);
  fixed_interval_smoother(model, result.trajectory);

  const StateTrajectory& traj = result.trajectory;
  const int p = traj.p;
  const int T = traj.T;
  const double phi = model.feedback.phi;
  const Eigen::MatrixXd& x = model.lead_field;

  EStepStats& stats = result.stats;

  // residual accumulator trace (diagnostic only): sum_t ||y_t - X b_{t|T}||^2
  // + tr(X V_{t|T} X')
  stats.b_trace = 0.0;
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd res =
        observations.row(t - 1).transpose() - x * traj.smoothed_mean[t];
    stats.b_trace += res.squaredNorm() +
                     (x * traj.smoothed_cov[t]).cwiseProduct(x).sum();
  }

  if (p <= full_stats_max_dim) {
    lag_covariance(result.trajectory);
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd a2 = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd a3 = Eigen::MatrixXd::Zero(p, p);
    for (int t = 1; t <= T; ++t) {
      a1 += traj.smoothed_cov[t] +
            traj.smoothed_mean[t] * traj.smoothed_mean[t].transpose();
      a2 += traj.lag_cov[t] +
            traj.smoothed_mean[t] * traj.smoothed_mean[t - 1].transpose();
      a3 += traj.smoothed_cov[t - 1] +
            traj.smoothed_mean[t - 1] * traj.smoothed_mean[t - 1].transpose();
    }
    const Eigen::MatrixXd f = Eigen::MatrixXd(model.feedback.entries);
    stats.a = a1 - phi * a2 * f.transpose() - phi * f * a2.transpose() +
              phi * phi * f * a3 * f.transpose();
    stats.a1 = std::move(a1);
    stats.a2 = std::move(a2);
    stats.a3 = std::move(a3);
    stats.diag_a = stats.a.diagonal();
    stats.full = true;
    return result;
  }

  // Streaming diagonal accumulation: diag(A) = diag(A1) - 2 phi s2 + phi^2 s3
  // with s2_i = sum_j F_ij (A2)_ij and s3 = diag(F A3 F').
  const Eigen::SparseMatrix<double, Eigen::RowMajor> f_rows =
      model.feedback.entries;
  Eigen::VectorXd diag_a1 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd s2 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd s3 = Eigen::VectorXd::Zero(p);
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd& bs = traj.smoothed_mean[t];
    const Eigen::VectorXd& bp = traj.smoothed_mean[t - 1];
    const Eigen::MatrixXd& vs = traj.smoothed_cov[t];
    const Eigen::MatrixXd& vp = traj.smoothed_cov[t - 1];
    const Eigen::MatrixXd& j_prev = traj.smoother_gain[t - 1];

    diag_a1 += vs.diagonal() + bs.cwiseAbs2();

    for (int i = 0; i < p; ++i) {
      double acc = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               f_rows, i);
           it; ++it) {
        const int j = static_cast<int>(it.col());
        // (V_{t,t-1|T})_ij = V_{t|T}.row(i) . J_{t-1}.row(j)
        const double lag_ij = vs.row(i).dot(j_prev.row(j));
        acc += it.value() * (lag_ij + bs[i] * bp[j]);
      }
      s2[i] += acc;
    }

    s3 += diag_sparse_quadratic(f_rows, vp);
    const Eigen::VectorXd fb_prev = f_rows * bp;
    s3 += fb_prev.cwiseAbs2();
  }
  stats.diag_a = diag_a1 - 2.0 * phi * s2 + phi * phi * s3;
  stats.full = false;
  return result;
}

Eigen::VectorXd m_step(const EStepStats& stats, const ModelSpec& model, int T) {
  if (T < 1) throw std::invalid_argument("m_step: T must be >= 1");
  const double phi = model.feedback.phi;
  const double one_minus_phi2 = 1.0 - phi * phi;
  if (one_minus_phi2 <= 0.0) {
    throw std::invalid_argument("m_step: requires phi^2 < 1");
  }
  const double b = model.prior.b;
  const double scale = model.noise.scale();  // lambda tr(Sigma_hat)
  const int p = static_cast<int>(stats.diag_a.size());

  Eigen::VectorXd nu(p);
  for (int j = 0; j < p; ++j) {
    double ajj = stats.diag_a[j];
    if (ajj < 0.0) {
      if (ajj < -1e-9 * std::max(1.0, stats.diag_a.cwiseAbs().maxCoeff())) {
        throw NumericalError("m_step: negative diagonal statistic");
      }
      ajj = 0.0;  // roundoff
    }
    nu[j] = (ajj * scale / one_minus_phi2 + 2.0 * b) / (T + 2.0 * b);
  }
  return nu;
}

double innovations_log_likelihood(const ModelSpec& model,
                                  const StateTrajectory& traj,
                                  const Eigen::MatrixXd& observations) {
  if (!traj.has_filtered) {
    throw ConfigError("innovations_log_likelihood: forward fields absent");
  }
  const int n = traj.n;
  const int T = traj.T;
  if (observations.rows() != T || observations.cols() != n) {
    throw std::invalid_argument("innovations_log_likelihood: shape mismatch");
  }
  const Eigen::MatrixXd& x = model.lead_field;

  double log_det_sum = 0.0;
  double quad_sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd residual =
        observations.row(t - 1).transpose() - x * traj.predicted_mean[t];
    Eigen::MatrixXd chol_l;
    if (t < static_cast<int>(traj.innovation_chol.size()) &&
        traj.innovation_chol[t].size() > 0) {
      chol_l = traj.innovation_chol[t];
    } else {
      Eigen::MatrixXd s = x * traj.predicted_cov[t] * x.transpose();
      s.diagonal().array() += 1.0;
      Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (s + s.transpose()));
      if (llt.info() != Eigen::Success) {
        throw NumericalError("innovations_log_likelihood: S_t not SPD");
      }
      chol_l = llt.matrixL();
    }
    log_det_sum += 2.0 * chol_l.diagonal().array().log().sum();
    const Eigen::VectorXd z =
        chol_l.triangularView<Eigen::Lower>().solve(residual);
    quad_sum += z.squaredNorm();
  }
  const double ll =
      -0.5 * n * T * kLog2Pi - 0.5 * log_det_sum - 0.5 * quad_sum;
  if (!std::isfinite(ll)) {
    throw NumericalError("innovations_log_likelihood: non-finite value");
  }
  return ll;
}

namespace {

EmResult run_em(ModelSpec model, const Eigen::MatrixXd& observations,
                const EmConfig& config) {
  if (config.max_iters < 1) {
    throw std::invalid_argument("EmConfig: max_iters must be >= 1");
  }
  if (!(config.rel_tol > 0.0)) {
    throw std::invalid_argument("EmConfig: rel_tol must be > 0");
  }
  const int p = model.num_sources();
  const int T = static_cast<int>(observations.rows());

  // Algorithm initialization: nu = 1, C0 = (lambda tr(Sigma_hat))^{-1} I.
  model.noise.nu = Eigen::VectorXd::Ones(p);
  model.c0 = Eigen::MatrixXd::Identity(p, p) / model.noise.scale();

  EmResult result;
  double prev_cost = 0.0;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    EStepResult es = e_step(model, observations);
    const double log_lik =
        innovations_log_likelihood(model, es.trajectory, observations);
    const double log_prior = prior_log_density(model.noise.nu, model.prior);
    const double cost = log_lik + log_prior;

    result.trace.iterates.push_back({model.noise.nu, log_lik, log_prior, cost});

    if (iter > 0) {
      if (cost < prev_cost - 1e-9 * std::abs(prev_cost)) {
        throw NumericalError("EM cost decreased: monotonicity violation");
      }
      if (std::abs(cost - prev_cost) / (1.0 + std::abs(cost)) < config.rel_tol) {
        result.trace.converged = true;
      }
    }
    prev_cost = cost;
    result.nu_map = model.noise.nu;
    result.trajectory = std::move(es.trajectory);

    if (result.trace.converged || iter + 1 == config.max_iters) break;

    model.noise.nu = m_step(es.stats, model, T);
    if (config.update_c0) {
      model.c0 = result.trajectory.smoothed_cov[0];
    }
  }

  result.trace.iterations = static_cast<int>(result.trace.iterates.size());
  return result;
}

}  // namespace

EmResult dmap_em(const ModelSpec& model, const Eigen::MatrixXd& observations,
                 const EmConfig& config) {
  return run_em(model, observations, config);
}

EmResult smap_em(const ModelSpec& model, const Eigen::MatrixXd& observations,
                 const EmConfig& config) {
  ModelSpec static_model = model;
  static_model.feedback.phi = 0.0;  // kills all temporal coupling
  return run_em(std::move(static_model), observations, config);
}

}  // namespace dynsolve
