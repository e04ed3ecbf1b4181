#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dynsolve/feedback.hpp"
#include "dynsolve/graph.hpp"
#include "dynsolve/lyapunov.hpp"
#include "dynsolve/model.hpp"
#include "oracles.hpp"

using namespace dynsolve;
namespace dt = dynsolve::testing;

namespace {

SourceGraph path_graph(const std::vector<double>& edge_lengths) {
  const int p = static_cast<int>(edge_lengths.size()) + 1;
  Eigen::MatrixX3d pos = Eigen::MatrixX3d::Zero(p, 3);
  double x = 0.0;
  std::vector<GraphEdge> edges;
  for (int i = 0; i + 1 < p; ++i) {
    x += edge_lengths[i];
    pos(i + 1, 0) = x;
    edges.push_back({i, i + 1, edge_lengths[i]});
  }
  return make_source_graph(pos, edges);
}

}  // namespace

TEST_CASE("graph validation rejects bad inputs") {
  Eigen::MatrixX3d pos = Eigen::MatrixX3d::Zero(2, 3);
  pos(1, 0) = 1.0;
  CHECK_THROWS_AS(make_source_graph(pos, {{0, 0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(make_source_graph(pos, {{0, 1, 0.0}}), ConfigError);
  CHECK_THROWS_AS(make_source_graph(pos, {{0, 1, -2.0}}), ConfigError);
  CHECK_THROWS_AS(make_source_graph(pos, {{0, 5, 1.0}}), ConfigError);
  CHECK_NOTHROW(make_source_graph(pos, {{0, 1, 1.0}}));
}

TEST_CASE("feedback weights: two equidistant neighbors") {
  // middle node of a 3-path with unit edges: f_ii = 0.5, each f_ij = 0.25
  const SourceGraph g = path_graph({1.0, 1.0});
  const FeedbackMatrix fb = build_feedback_matrix(g, 0.95);
  const Eigen::MatrixXd f(fb.entries);
  CHECK(f(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(f(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(f(1, 2) == doctest::Approx(0.25).epsilon(1e-14));
  validate_feedback(fb, g);
}

TEST_CASE("feedback weights: neighbors at distances 1 and 3") {
  // w * (1 + 1/3) = 0.5  =>  weights 0.375 and 0.125
  const SourceGraph g = path_graph({1.0, 3.0});
  const FeedbackMatrix fb = build_feedback_matrix(g, 0.5);
  const Eigen::MatrixXd f(fb.entries);
  CHECK(f(1, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(f(1, 0) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(f(1, 2) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("feedback weights: isolated node gets unit self-weight") {
  Eigen::MatrixX3d pos = Eigen::MatrixX3d::Zero(3, 3);
  pos(1, 0) = 1.0;
  pos(2, 0) = 5.0;
  const SourceGraph g = make_source_graph(pos, {{0, 1, 1.0}});
  const FeedbackMatrix fb = build_feedback_matrix(g, 0.9);
  const Eigen::MatrixXd f(fb.entries);
  CHECK(f(2, 2) == 1.0);
  CHECK(f.row(2).sum() == 1.0);
  validate_feedback(fb, g);
}

TEST_CASE("feedback row invariants on random graphs") {
  std::mt19937_64 rng(12345);
  for (int rep = 0; rep < 20; ++rep) {
    const ModelSpec model = dt::random_model(rng, 6, 2);
    Eigen::MatrixXd f(model.feedback.entries);
    for (int i = 0; i < 6; ++i) {
      const double diag = f(i, i);
      const double row_sum = f.row(i).sum();
      CHECK(std::abs(row_sum - 1.0) < 1e-12);
      if (diag != 1.0) {
        CHECK(std::abs(diag - 0.5) < 1e-12);
        CHECK(std::abs((row_sum - diag) - diag) < 1e-12);
      }
    }
    // row-stochastic bound: rho(phi F) < 1 via power iteration
    Eigen::SparseMatrix<double> folded = model.feedback.phi * model.feedback.entries;
    CHECK(spectral_radius(folded) < 1.0);
  }
}

TEST_CASE("build_feedback_matrix rejects phi outside [0,1)") {
  const SourceGraph g = path_graph({1.0});
  CHECK_THROWS_AS(build_feedback_matrix(g, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_feedback_matrix(g, -0.1), std::invalid_argument);
}

TEST_CASE("validate_feedback flags broken matrices") {
  const SourceGraph g = path_graph({1.0, 1.0});
  FeedbackMatrix fb = build_feedback_matrix(g, 0.9);

  SUBCASE("entry outside the neighbor pattern") {
    FeedbackMatrix bad = fb;
    Eigen::MatrixXd dense(bad.entries);
    dense(0, 2) = 0.1;  // nodes 0 and 2 are not neighbors
    bad.entries = dense.sparseView();
    CHECK_THROWS_AS(validate_feedback(bad, g), ConfigError);
  }
  SUBCASE("row normalization broken") {
    FeedbackMatrix bad = fb;
    Eigen::MatrixXd dense(bad.entries);
    dense(1, 0) += 0.05;
    bad.entries = dense.sparseView();
    CHECK_THROWS_AS(validate_feedback(bad, g), ConfigError);
  }
  SUBCASE("size mismatch") {
    const SourceGraph other = path_graph({1.0});
    CHECK_THROWS_AS(validate_feedback(fb, other), ConfigError);
  }
}

TEST_CASE("spectral radius by power iteration") {
  Eigen::SparseMatrix<double> m(3, 3);
  m.insert(0, 0) = 0.5;
  m.insert(1, 1) = 0.2;
  m.insert(2, 2) = -0.1;
  CHECK(spectral_radius(m) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("state noise covariance") {
  NoiseModel noise;
  SUBCASE("nu = 1, lambda*tr = 4 -> 0.25 I") {
    noise.lambda = 2.0;
    noise.tr_sigma_hat = 2.0;
    noise.nu = Eigen::VectorXd::Ones(3);
    const Eigen::MatrixXd q = build_state_noise_cov(noise);
    CHECK((q - 0.25 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-15);
  }
  SUBCASE("nu = (2,8), lambda*tr = 2 -> diag(1,4)") {
    noise.lambda = 1.0;
    noise.tr_sigma_hat = 2.0;
    noise.nu = Eigen::Vector2d(2.0, 8.0);
    const Eigen::MatrixXd q = build_state_noise_cov(noise);
    CHECK(q(0, 0) == doctest::Approx(1.0));
    CHECK(q(1, 1) == doctest::Approx(4.0));
    CHECK(q(0, 1) == 0.0);
  }
  SUBCASE("nonpositive inputs rejected") {
    noise.lambda = -1.0;
    noise.tr_sigma_hat = 1.0;
    noise.nu = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(build_state_noise_cov(noise), std::invalid_argument);
    noise.lambda = 1.0;
    noise.nu[1] = 0.0;
    CHECK_THROWS_AS(build_state_noise_cov(noise), std::invalid_argument);
  }
}

TEST_CASE("prior log density") {
  PriorSpec prior{3.1};
  SUBCASE("all-ones nu gives -b*p") {
    const Eigen::VectorXd nu = Eigen::VectorXd::Ones(7);
    CHECK(prior_log_density(nu, prior) == doctest::Approx(-3.1 * 7).epsilon(1e-14));
  }
  SUBCASE("scalar argmax is nu = 1 for any b > 0") {
    for (double b : {0.5, 3.1, 12.0}) {
      PriorSpec ps{b};
      auto f = [&](double nu) {
        return prior_log_density(Eigen::VectorXd::Constant(1, nu), ps);
      };
      const double arg = dt::golden_section_max(f, 1e-6, 1e6);
      CHECK(std::abs(arg - 1.0) < 1e-6);
    }
  }
  SUBCASE("finite-difference gradient vanishes at nu = 1") {
    const double h = 1e-6;
    const double g =
        (prior_log_density(Eigen::VectorXd::Constant(1, 1.0 + h), prior) -
         prior_log_density(Eigen::VectorXd::Constant(1, 1.0 - h), prior)) /
        (2.0 * h);
    CHECK(std::abs(g) < 1e-6);
  }
  SUBCASE("variance formula") {
    CHECK(prior_variance(PriorSpec{4.0}) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(prior_variance(PriorSpec{3.5}) ==
          doctest::Approx(3.5 * 3.5 / (1.5 * 1.5 * 0.5)).epsilon(1e-14));
    CHECK_THROWS_AS(prior_variance(PriorSpec{3.0}), std::invalid_argument);
  }
  SUBCASE("variance matches quadrature of the density") {
    // inverse gamma with shape b-1 and scale b, integrated on a log grid
    for (double b : {3.5, 4.0, 10.0}) {
      const double log_norm = (b - 1.0) * std::log(b) - std::lgamma(b - 1.0);
      auto pdf = [&](double v) {
        return std::exp(log_norm - b * std::log(v) - b / v);
      };
      const int k = 200000;
      const double lo = std::log(1e-8), hi = std::log(1e10);
      const double du = (hi - lo) / k;
      double m1 = 0.0, m2 = 0.0, mass = 0.0;
      for (int i = 0; i <= k; ++i) {
        const double u = lo + i * du;
        const double v = std::exp(u);
        const double w = (i == 0 || i == k) ? 0.5 : 1.0;  // trapezoid
        const double f = pdf(v) * v * du * w;             // dv = v du
        mass += f;
        m1 += v * f;
        m2 += v * v * f;
      }
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
      const double var = m2 - m1 * m1;
      CHECK(var == doctest::Approx(prior_variance(PriorSpec{b})).epsilon(1e-4));
    }
  }
  SUBCASE("nonpositive nu rejected") {
    Eigen::VectorXd nu = Eigen::VectorXd::Ones(2);
    nu[0] = 0.0;
    CHECK_THROWS_AS(prior_log_density(nu, prior), std::invalid_argument);
  }
}

TEST_CASE("steady-state covariance") {
  SUBCASE("F = phi I, Q = (1-phi^2) sigma^2 I -> sigma^2 I") {
    const double phi = 0.8, sigma2 = 2.5;
    FeedbackMatrix fb;
    fb.phi = phi;
    fb.entries.resize(3, 3);
    fb.entries.setIdentity();
    const Eigen::MatrixXd q =
        (1.0 - phi * phi) * sigma2 * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd c = steady_state_covariance(fb, q);
    CHECK((c - sigma2 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
          1e-10);
  }
  SUBCASE("F = 0 -> C = Q") {
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd q = dt::random_spd(rng, 4);
    const Eigen::MatrixXd c =
        solve_discrete_lyapunov(Eigen::MatrixXd::Zero(4, 4), q);
    CHECK((c - q).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random stable 5x5 matches fixed-point iteration") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::MatrixXd a = dt::random_matrix_with_norm(rng, 5, 0.9);
      const Eigen::MatrixXd q = dt::random_spd(rng, 5);
      const Eigen::MatrixXd c = solve_discrete_lyapunov(a, q);
      const Eigen::MatrixXd c_ref = dt::lyapunov_fixed_point(a, q);
      CHECK((c - c_ref).cwiseAbs().maxCoeff() <
            1e-9 * std::max(1.0, c_ref.cwiseAbs().maxCoeff()));
      // residual invariant
      const Eigen::MatrixXd resid = c - a * c * a.transpose() - q;
      CHECK(resid.cwiseAbs().maxCoeff() < 1e-9 * q.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("unstable transition rejected") {
    const Eigen::MatrixXd a = 1.1 * Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(
        solve_discrete_lyapunov(a, Eigen::MatrixXd::Identity(2, 2)),
        NumericalError);
  }
}

TEST_CASE("perturbation bound") {
  SUBCASE("zero perturbation: lhs = rhs = 0") {
    const Eigen::MatrixXd f = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    const auto r = perturbation_bound_check(f, Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::MatrixXd::Zero(2, 2));
    CHECK(r.lhs == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.rhs == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("scalar closed forms: F = 0.5 I, dF = 0.1 I") {
    const Eigen::MatrixXd f = 0.5 * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd df = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    const auto r =
        perturbation_bound_check(f, Eigen::MatrixXd::Identity(2, 2), df);
    const double lhs_expected = 1.0 / (1.0 - 0.36) - 1.0 / 0.75;
    CHECK(r.lhs == doctest::Approx(lhs_expected).epsilon(1e-9));
    const double rhs_expected = 4.0 * (1.0 / 0.64) / (1.0 - 0.25) * 0.1;
    CHECK(r.rhs == doctest::Approx(rhs_expected).epsilon(1e-9));
    CHECK(r.lhs < r.rhs);
  }
  SUBCASE("bound holds on 100 random stable pairs") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int done = 0;
    while (done < 100) {
      const int p = 2 + static_cast<int>(unif(rng) * 4);
      const Eigen::MatrixXd f =
          dt::random_matrix_with_norm(rng, p, 0.1 + 0.85 * unif(rng));
      const Eigen::MatrixXd df =
          dt::random_matrix_with_norm(rng, p, 0.05 * unif(rng) + 1e-4);
      if ((f + df).eigenvalues().cwiseAbs().maxCoeff() >= 1.0) continue;
      const Eigen::MatrixXd q = dt::random_spd(rng, p);
      const auto r = perturbation_bound_check(f, q, df);
      CHECK(r.lhs < r.rhs);
      ++done;
    }
  }
  SUBCASE("unstable input rejected") {
    const Eigen::MatrixXd f = 0.95 * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd df = 0.2 * Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(
        perturbation_bound_check(f, Eigen::MatrixXd::Identity(2, 2), df),
        NumericalError);
  }
  SUBCASE("FeedbackMatrix overload folds phi") {
    FeedbackMatrix fb;
    fb.phi = 0.5;
    fb.entries.resize(2, 2);
    fb.entries.setIdentity();
    const Eigen::MatrixXd q = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd df = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    const auto via_fb = perturbation_bound_check(fb, q, df);
    const auto via_raw =
        perturbation_bound_check(0.5 * Eigen::MatrixXd::Identity(2, 2), q, df);
    CHECK(via_fb.lhs == doctest::Approx(via_raw.lhs).epsilon(1e-12));
    CHECK(via_fb.rhs == doctest::Approx(via_raw.rhs).epsilon(1e-12));
  }
}

TEST_CASE("make_model_spec wires the standard initialization") {
  std::mt19937_64 rng(5);
  const SourceGraph g = make_ring_graph(8, 2.0);
  Eigen::MatrixXd x(3, 8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);
  const ModelSpec model = make_model_spec(x, g, 0.95, 5.0, 3.1);
  CHECK(model.noise.lambda == doctest::Approx(0.2));
  CHECK(model.noise.tr_sigma_hat ==
        doctest::Approx(x.squaredNorm() / 3.0).epsilon(1e-14));
  CHECK((model.noise.nu.array() == 1.0).all());
  const double expected_c0 = 1.0 / (0.2 * x.squaredNorm() / 3.0);
  CHECK(model.c0(0, 0) == doctest::Approx(expected_c0).epsilon(1e-12));
}
