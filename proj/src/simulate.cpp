#include "dynsolve/simulate.hpp"

#include <cmath>
#include <random>

namespace dynsolve {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::RowVector3d graph_centroid(const SourceGraph& graph) {
  return graph.positions.colwise().mean();
}

bool same_discretization(const SourceGraph& a, const SourceGraph& b) {
  if (a.num_nodes() != b.num_nodes()) return false;
  return (a.positions - b.positions).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

int SimulationConfig::num_samples() const {
  return static_cast<int>(std::lround(duration_s * sample_rate_hz));
}

void SimulationConfig::validate() const {
  if (patch_indices.empty()) throw ConfigError("simulation: patch is empty");
  if (!(target_snr > 0.0)) throw ConfigError("simulation: target SNR must be > 0");
  if (!(sample_rate_hz > 2.0 * waveform_freq_hz)) {
    throw ConfigError("simulation: sample rate must exceed twice the waveform frequency");
  }
  if (num_samples() < 1) throw ConfigError("simulation: duration too short");
}

std::vector<int> nearest_coarse_map(const SourceGraph& fine_graph,
                                    const SourceGraph& coarse_graph) {
  const int pf = fine_graph.num_nodes();
  const int pc = coarse_graph.num_nodes();
  std::vector<int> parent(pf, 0);
  for (int i = 0; i < pf; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < pc; ++j) {
      const double d2 =
          (fine_graph.positions.row(i) - coarse_graph.positions.row(j))
              .squaredNorm();
      if (d2 < best) {
        best = d2;
        parent[i] = j;
      }
    }
  }
  return parent;
}

SimulationOutput simulate_patch(const SourceGraph& fine_graph,
                                const Eigen::MatrixXd& fine_lead_field,
                                const SourceGraph& coarse_graph,
                                const SimulationConfig& config) {
  config.validate();
  const int pf = fine_graph.num_nodes();
  const int pc = coarse_graph.num_nodes();
  const int n = static_cast<int>(fine_lead_field.rows());
  if (static_cast<int>(fine_lead_field.cols()) != pf) {
    throw ConfigError("simulation: fine lead field does not match fine graph");
  }
  if (same_discretization(fine_graph, coarse_graph)) {
    throw ConfigError(
        "simulation: fine and coarse graphs are the same discretization "
        "(inverse crime)");
  }
  for (int idx : config.patch_indices) {
    if (idx < 0 || idx >= pf) throw ConfigError("simulation: patch index out of range");
  }

  const int T = config.num_samples();
  const double dt = 1.0 / config.sample_rate_hz;

  // unit-amplitude sinusoid on the patch, sampled at t = dt, 2dt, ...
  Eigen::VectorXd waveform(T);
  for (int t = 1; t <= T; ++t) {
    waveform[t - 1] = std::sin(2.0 * kPi * config.waveform_freq_hz * dt * t);
  }

  // noiseless sensor signal from the patch columns
  Eigen::VectorXd patch_gain_sum = Eigen::VectorXd::Zero(n);
  for (int idx : config.patch_indices) {
    patch_gain_sum += fine_lead_field.col(idx);
  }
  const Eigen::MatrixXd signal = waveform * patch_gain_sum.transpose();  // T x n

  const bool noiseless = config.target_snr >= kNoiselessSnrCap;
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(T, n);
  double amplitude = 1.0;
  if (!noiseless) {
    std::mt19937_64 rng(config.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < n; ++s) noise(t, s) = gauss(rng);
    }
    const double signal_power = signal.squaredNorm();
    const double noise_power = noise.squaredNorm();
    if (!(signal_power > 0.0)) {
      throw ConfigError("simulation: patch produces no sensor signal");
    }
    // single global amplitude scalar sets the empirical power SNR exactly
    amplitude = std::sqrt(config.target_snr * noise_power / signal_power);
    if (!std::isfinite(amplitude)) {
      throw NumericalError("simulation: SNR calibration diverged");
    }
  }

  SimulationOutput out;
  out.observations = amplitude * signal + noise;
  out.achieved_snr =
      noiseless ? config.target_snr
                : (amplitude * amplitude) * signal.squaredNorm() / noise.squaredNorm();

  // aggregate the fine truth onto the coarse graph for scoring
  const std::vector<int> parent = nearest_coarse_map(fine_graph, coarse_graph);
  Eigen::VectorXd coarse_amplitude = Eigen::VectorXd::Zero(pc);
  for (int idx : config.patch_indices) {
    coarse_amplitude[parent[idx]] += amplitude;
  }
  out.true_coarse_sources = waveform * coarse_amplitude.transpose();  // T x pc
  out.active_mask.assign(pc, false);
  for (int j = 0; j < pc; ++j) {
    out.active_mask[j] = coarse_amplitude[j] != 0.0;
  }
  return out;
}

Eigen::MatrixXd synth_lead_field(const SourceGraph& graph, int n_sensors,
                                 std::uint64_t seed) {
  if (n_sensors < 1) throw std::invalid_argument("need at least one sensor");
  LeadFieldPair pair = synth_lead_field_pair(graph, graph, n_sensors, seed);
  return pair.coarse;
}

LeadFieldPair synth_lead_field_pair(const SourceGraph& coarse_graph,
                                    const SourceGraph& fine_graph,
                                    int n_sensors, std::uint64_t seed,
                                    const std::optional<HelmetSpec>& helmet) {
  if (n_sensors < 1) throw std::invalid_argument("need at least one sensor");
  const Eigen::RowVector3d center = graph_centroid(fine_graph);
  double max_radius = 0.0;
  for (int i = 0; i < fine_graph.num_nodes(); ++i) {
    max_radius =
        std::max(max_radius, (fine_graph.positions.row(i) - center).norm());
  }
  for (int i = 0; i < coarse_graph.num_nodes(); ++i) {
    max_radius =
        std::max(max_radius, (coarse_graph.positions.row(i) - center).norm());
  }
  if (!(max_radius > 0.0)) {
    throw ConfigError("lead field: degenerate source geometry");
  }
  const double sensor_radius = 1.2 * max_radius;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixX3d sensors(n_sensors, 3);
  if (helmet) {
    // jittered golden-spiral cap around the aim direction
    if (!(helmet->aim.norm() > 1e-12)) {
      throw ConfigError("lead field: helmet aim must be a nonzero direction");
    }
    const Eigen::RowVector3d az = helmet->aim / helmet->aim.norm();
    Eigen::RowVector3d ax = az.cross(Eigen::RowVector3d(1.0, 0.0, 0.0));
    if (ax.norm() < 1e-6) ax = az.cross(Eigen::RowVector3d(0.0, 1.0, 0.0));
    ax /= ax.norm();
    const Eigen::RowVector3d ay = az.cross(ax);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double z_span = 1.0 - std::cos(helmet->half_angle_rad);
    for (int s = 0; s < n_sensors; ++s) {
      const double z = 1.0 - z_span * (s + 0.5) / n_sensors;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double theta = golden * s;
      Eigen::RowVector3d dir =
          z * az + rho * (std::cos(theta) * ax + std::sin(theta) * ay);
      Eigen::RowVector3d jitter(gauss(rng), gauss(rng), gauss(rng));
      dir += 0.05 * jitter;
      sensors.row(s) = center + sensor_radius * dir / dir.norm();
    }
  } else {
    for (int s = 0; s < n_sensors; ++s) {
      Eigen::RowVector3d dir;
      do {
        dir << gauss(rng), gauss(rng), gauss(rng);
      } while (dir.norm() < 1e-12);
      sensors.row(s) = center + sensor_radius * dir / dir.norm();
    }
  }

  // Orientation field shared by both discretizations: outward normal plus a
  // smooth random tilt (3 Gaussian bumps drawn from the seed). Smoothness
  // keeps fine and coarse dipoles at nearby positions consistently oriented.
  const int n_bumps = 3;
  Eigen::MatrixX3d bump_center(n_bumps, 3);
  Eigen::MatrixX3d bump_tilt(n_bumps, 3);
  for (int k = 0; k < n_bumps; ++k) {
    Eigen::RowVector3d c, v;
    do {
      c << gauss(rng), gauss(rng), gauss(rng);
    } while (c.norm() < 1e-12);
    do {
      v << gauss(rng), gauss(rng), gauss(rng);
    } while (v.norm() < 1e-12);
    bump_center.row(k) = center + max_radius * c / c.norm();
    bump_tilt.row(k) = 0.3 * v / v.norm();
  }
  const double bump_sigma2 = 0.25 * max_radius * max_radius;
  auto orientation_at = [&](const Eigen::RowVector3d& x) {
    Eigen::RowVector3d u = Eigen::RowVector3d::Zero();
    const Eigen::RowVector3d normal = x - center;
    if (normal.norm() > 1e-9) u = normal / normal.norm();
    for (int k = 0; k < n_bumps; ++k) {
      const double w =
          std::exp(-(x - bump_center.row(k)).squaredNorm() / (2.0 * bump_sigma2));
      u += w * bump_tilt.row(k);
    }
    if (u.norm() < 1e-9) u << 1.0, 0.0, 0.0;
    return Eigen::RowVector3d(u / u.norm());
  };

  auto fill_gains = [&](const SourceGraph& graph) {
    const int p = graph.num_nodes();
    Eigen::MatrixX3d orientation(p, 3);
    for (int j = 0; j < p; ++j) {
      orientation.row(j) = orientation_at(graph.positions.row(j));
    }
    Eigen::MatrixXd gains(n_sensors, p);
    for (int s = 0; s < n_sensors; ++s) {
      for (int j = 0; j < p; ++j) {
        const Eigen::RowVector3d diff = sensors.row(s) - graph.positions.row(j);
        const double r = diff.norm();
        if (r < 1e-9) {
          throw ConfigError("lead field: source coincides with a sensor");
        }
        gains(s, j) = orientation.row(j).dot(diff / r) / (r * r);
      }
    }
    for (int j = 0; j < p; ++j) {
      if (gains.col(j).cwiseAbs().maxCoeff() == 0.0) {
        throw NumericalError("lead field: zero gain column");
      }
    }
    return gains;
  };

  LeadFieldPair pair;
  pair.sensors = sensors;
  pair.coarse = fill_gains(coarse_graph);
  pair.fine = (&coarse_graph == &fine_graph) ? pair.coarse : fill_gains(fine_graph);
  return pair;
}

WhitenedData whiten(const Eigen::MatrixXd& raw_observations,
                    const Eigen::MatrixXd& raw_lead_field,
                    const Eigen::MatrixXd& noise_cov) {
  const int n = static_cast<int>(raw_lead_field.rows());
  if (noise_cov.rows() != n || noise_cov.cols() != n) {
    throw std::invalid_argument("whiten: noise covariance must be n x n");
  }
  if (static_cast<int>(raw_observations.cols()) != n) {
    throw std::invalid_argument("whiten: observations must be T x n");
  }
  const double scale = std::max(1.0, noise_cov.cwiseAbs().maxCoeff());
  if ((noise_cov - noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("whiten: noise covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(noise_cov);
  if (es.info() != Eigen::Success) {
    throw NumericalError("whiten: eigendecomposition failed");
  }
  const Eigen::VectorXd evals = es.eigenvalues();
  if (evals.minCoeff() <= 1e-12 * evals.maxCoeff() || evals.minCoeff() <= 0.0) {
    throw std::invalid_argument("whiten: noise covariance not positive definite");
  }
  const Eigen::MatrixXd w = es.eigenvectors() *
                            evals.cwiseSqrt().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();
  WhitenedData out;
  out.observations = raw_observations * w;  // (W y_t)' rows
  out.lead_field = w * raw_lead_field;
  return out;
}

}  // namespace dynsolve
