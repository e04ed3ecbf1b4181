#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dynsolve/evaluate.hpp"

using namespace dynsolve;

namespace {

// truth with an active block and silence elsewhere
Eigen::MatrixXd block_truth(int T, int p, int active) {
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(T, p);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < active; ++j) {
      truth(t, j) = 2.0 * std::sin(0.3 * (t + 1) + j);
      if (truth(t, j) == 0.0) truth(t, j) = 0.1;
    }
  }
  return truth;
}

}  // namespace

TEST_CASE("perfect detector: prD = 1, prFA = 0, AUC = 1") {
  const Eigen::MatrixXd truth = block_truth(5, 8, 3);
  const double min_abs = 0.1;  // smaller than any nonzero |truth|
  const EvalReport rep = roc_curve(truth, truth, {min_abs * 0.5});
  REQUIRE(rep.roc_points.size() == 1);
  CHECK(rep.roc_points[0].pr_d == 1.0);
  CHECK(rep.roc_points[0].pr_fa == 0.0);
  CHECK(rep.auc == doctest::Approx(1.0));

  // negated estimates threshold identically (absolute value)
  const EvalReport neg =
      roc_curve(-truth, truth, default_threshold_grid(truth));
  CHECK(neg.auc == doctest::Approx(1.0));
}

TEST_CASE("hand case: truth mask (1,1,0,0), |est| = (3,1,2,0), c = 1.5") {
  Eigen::MatrixXd truth(1, 4), est(1, 4);
  truth << 1.0, 1.0, 0.0, 0.0;
  est << 3.0, 1.0, 2.0, 0.0;
  const EvalReport rep = roc_curve(est, truth, {1.5});
  CHECK(rep.roc_points[0].pr_d == doctest::Approx(0.5));
  CHECK(rep.roc_points[0].pr_fa == doctest::Approx(0.5));
}

TEST_CASE("chance detector hovers at AUC 0.5") {
  std::mt19937_64 rng(4321);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int T = 100, p = 100;  // 10^4 cells
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(T, p);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < p / 2; ++j) truth(t, j) = 1.0;
  }
  Eigen::MatrixXd est(T, p);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < p; ++j) est(t, j) = gauss(rng);
  }
  const EvalReport rep = roc_curve(est, truth, default_threshold_grid(est));
  CHECK(std::abs(rep.auc - 0.5) < 0.05);
}

TEST_CASE("roc monotonicity in the threshold") {
  std::mt19937_64 rng(555);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd truth = block_truth(20, 30, 7);
  Eigen::MatrixXd est(20, 30);
  for (int i = 0; i < est.size(); ++i) est.data()[i] = gauss(rng);
  const EvalReport rep = roc_curve(est, truth, default_threshold_grid(est));
  for (size_t k = 1; k < rep.roc_points.size(); ++k) {
    // points sorted by descending threshold: rates must be non-decreasing
    CHECK(rep.roc_points[k].pr_d >= rep.roc_points[k - 1].pr_d);
    CHECK(rep.roc_points[k].pr_fa >= rep.roc_points[k - 1].pr_fa);
    CHECK(rep.roc_points[k].pr_d >= 0.0);
    CHECK(rep.roc_points[k].pr_d <= 1.0);
  }
  CHECK(rep.auc >= 0.0);
  CHECK(rep.auc <= 1.0);
}

TEST_CASE("degenerate truth rejected") {
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 3);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(roc_curve(ones, zeros, {0.5}), ConfigError);
  CHECK_THROWS_AS(roc_curve(ones, ones, {0.5}), ConfigError);
}

TEST_CASE("rmse basics") {
  const int T = 6, p = 5;
  const Eigen::MatrixXd truth = block_truth(T, p, 2);
  std::vector<bool> mask = {true, true, false, false, false};

  SUBCASE("estimates equal truth -> all zero") {
    const EvalReport rep = rmse(truth, truth, mask);
    CHECK(rep.rmse_per_dipole.cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.inside_mean == 0.0);
  }
  SUBCASE("constant offset on one dipole -> its RMSE = |delta|") {
    Eigen::MatrixXd est = truth;
    est.col(3).array() += -0.75;
    const EvalReport rep = rmse(est, truth, mask);
    CHECK(rep.rmse_per_dipole[3] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(rep.rmse_per_dipole[4] == 0.0);
  }
  SUBCASE("time permutation leaves RMSE unchanged") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd est(T, p);
    for (int i = 0; i < est.size(); ++i) est.data()[i] = gauss(rng);
    const int perm[6] = {3, 5, 0, 1, 4, 2};
    Eigen::MatrixXd est_p(T, p), truth_p(T, p);
    for (int t = 0; t < T; ++t) {
      est_p.row(t) = est.row(perm[t]);
      truth_p.row(t) = truth.row(perm[t]);
    }
    const EvalReport a = rmse(est, truth, mask);
    const EvalReport b = rmse(est_p, truth_p, mask);
    CHECK((a.rmse_per_dipole - b.rmse_per_dipole).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("quantiles") {
  Eigen::VectorXd v(5);
  v << 1, 2, 3, 4, 5;
  CHECK(quantile(v, 0.5) == doctest::Approx(3.0));
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(5.0));
  CHECK(quantile(v, 0.25) == doctest::Approx(2.0));
  // monotone in q
  double prev = -1e300;
  for (double q = 0.0; q <= 1.0; q += 0.05) {
    const double val = quantile(v, q);
    CHECK(val >= prev);
    prev = val;
  }
}

TEST_CASE("compare_methods") {
  const Eigen::MatrixXd truth = block_truth(10, 12, 4);
  std::vector<bool> mask(12, false);
  for (int j = 0; j < 4; ++j) mask[j] = true;

  SUBCASE("identical reports give zero reductions") {
    const EvalReport rep = evaluate_estimates(truth, truth, mask);
    const MethodComparison cmp = compare_methods({{"a", rep}, {"b", rep}});
    for (const auto& [a, inner] : cmp.reduction_pct) {
      for (const auto& [b, red] : inner) {
        for (double r : red) CHECK(r == doctest::Approx(0.0));
      }
    }
  }
  SUBCASE("quantile 0.1 vs 0.2 -> 50% reduction") {
    EvalReport a, b;
    a.truth_fingerprint = b.truth_fingerprint = 1;
    a.auc = 0.9;
    b.auc = 0.7;
    for (double q : {0.5, 0.75, 0.99}) {
      a.outside_quantiles[q] = 0.1;
      b.outside_quantiles[q] = 0.2;
    }
    const MethodComparison cmp = compare_methods({{"a", a}, {"b", b}});
    CHECK(cmp.auc_order.front() == "a");
    for (double r : cmp.reduction_pct.at("a").at("b")) {
      CHECK(r == doctest::Approx(50.0));
    }
    const std::string table = format_comparison_table(cmp);
    CHECK(table.find("a vs b") != std::string::npos);
  }
  SUBCASE("mismatched truth fingerprints rejected") {
    EvalReport a, b;
    a.truth_fingerprint = 1;
    b.truth_fingerprint = 2;
    CHECK_THROWS_AS(compare_methods({{"a", a}, {"b", b}}), ConfigError);
  }
  SUBCASE("fewer than two reports rejected") {
    EvalReport a;
    CHECK_THROWS_AS(compare_methods({{"a", a}}), ConfigError);
  }
}
