#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "cspi/dgp.hpp"
#include "cspi/estimator.hpp"
#include "cspi/reference.hpp"
#include "cspi/rng.hpp"

using namespace cspi;

namespace {

Observation make_obs(double s, int a, double y) {
  Observation o;
  o.covariates = {s};
  o.score = s;
  o.treatment = a;
  o.outcome = y;
  return o;
}

FittedNuisance zero_mu_half_e(int k = 2) {
  return FittedNuisance::from_functions(
      k, [](int, const Observation&) { return 0.0; },
      [](const Observation&) { return 0.5; });
}

// Exact conditional means and propensity for the synthetic generators.
FittedNuisance oracle_nuisance(DgpId dgp, int k) {
  return FittedNuisance::from_functions(
      k,
      [dgp](int a, const Observation& o) {
        const double x1 = o.covariates[1];
        const double x2 = o.covariates[2];
        return a == 1 ? score_effect(dgp, o.score) - 2.0 * x1 - 3.0 * x2
                      : 2.0 * x1 - 3.0 * x2;
      },
      [](const Observation&) { return 0.5; });
}

std::vector<std::vector<int>> trivial_folds(int n, int k) {
  std::vector<std::vector<int>> folds(k);
  for (int i = 0; i < n; ++i) folds[i % k].push_back(i);
  return folds;
}

}  // namespace

TEST_SUITE_BEGIN("estimator");

TEST_CASE("influence contribution hand cases") {
  const auto nuis = zero_mu_half_e();

  // Empty interval and out-of-range scores contribute nothing.
  CHECK(influence_contribution(make_obs(0.3, 1, 5.0), 1.0, 1.0, nuis, 0) == 0.0);
  CHECK(influence_contribution(make_obs(1.7, 1, 5.0), 1.0, 0.0, nuis, 0) == 0.0);
  CHECK(influence_contribution(make_obs(1.0, 1, 5.0), 1.0, 0.0, nuis, 0) == 0.0);

  // mu == 0, e == 1/2, baseline below cutoff, treated unit with outcome y:
  // psi1 = 2y, psi0 = 0, so the contribution is -(2y).
  CHECK(influence_contribution(make_obs(0.5, 1, 3.0), 1.0, 0.0, nuis, 0) ==
        doctest::Approx(-6.0));
  // Control unit: psi0 = 2y, psi1 = 0, contribution +2y.
  CHECK(influence_contribution(make_obs(0.5, 0, 3.0), 1.0, 0.0, nuis, 0) ==
        doctest::Approx(6.0));
  // Baseline at or above the cutoff flips the sign.
  CHECK(influence_contribution(make_obs(0.5, 1, 3.0), 0.0, 1.0, nuis, 0) ==
        doctest::Approx(6.0));
}

TEST_CASE("sign antisymmetry in (c, c0)") {
  const auto nuis = zero_mu_half_e();
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto o = make_obs(2.0 * rng.uniform() - 1.0, rng.uniform() < 0.5,
                            rng.normal());
    const double c = 2.0 * rng.uniform() - 1.0;
    const double c0 = 2.0 * rng.uniform() - 1.0;
    CHECK(influence_contribution(o, c, c0, nuis, 0) ==
          -influence_contribution(o, c0, c, nuis, 0));
  }
}

TEST_CASE("interval additivity across a middle cutoff") {
  const auto nuis = zero_mu_half_e();
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto o = make_obs(2.0 * rng.uniform() - 1.0, rng.uniform() < 0.5,
                            rng.normal());
    const double c0 = -0.8, c1 = 0.1, c2 = 0.9;
    if (o.score == c1) continue;  // measure-zero boundary convention
    const double whole = influence_contribution(o, c2, c0, nuis, 0);
    const double left = influence_contribution(o, c1, c0, nuis, 0);
    const double right = influence_contribution(o, c2, c1, nuis, 0);
    CHECK(whole == doctest::Approx(left + right).epsilon(1e-12));
  }
}

TEST_CASE("column means equal tau exactly and baseline column is zero") {
  const Dataset data = generate({DgpId::DGP1, 300, 6});
  const auto folds = trivial_folds(300, 3);
  const auto nuis = zero_mu_half_e(3);
  const std::vector<double> cutoffs = {-1.0, 0.0, 2.0};  // 2.0 == baseline
  const auto res = estimate_policy_diffs(data, cutoffs, 2.0, nuis, folds);

  for (int j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (int i = 0; i < 300; ++i) sum += res.psi.values(i, j);
    CHECK(res.est.tau_hat(j) == sum / 300);  // bitwise
  }
  CHECK(res.est.tau_hat(2) == 0.0);
  for (int j = 0; j < 3; ++j) {
    CHECK(res.est.sigma_hat(2, j) == 0.0);
    CHECK(res.est.sigma_hat(j, 2) == 0.0);
  }
  CHECK(res.est.n == 300);
  CHECK(res.est.baseline == 2.0);
}

TEST_CASE("moments match a four-row hand computation") {
  std::vector<Observation> obs = {
      make_obs(0.2, 1, 1.0),
      make_obs(0.4, 0, 2.0),
      make_obs(0.6, 1, -1.0),
      make_obs(2.0, 0, 3.0),  // outside every interval below
  };
  const Dataset data(std::move(obs), 1);
  const auto folds = trivial_folds(4, 2);
  const auto nuis = zero_mu_half_e();
  const std::vector<double> cutoffs = {0.5, 1.0};
  const auto res = estimate_policy_diffs(data, cutoffs, 0.0, nuis, folds);

  // psi columns: c=0.5 covers scores in (0, 0.5): rows 0, 1.
  // c=1.0 covers (0, 1): rows 0, 1, 2. Treated rows give -2y, controls +2y.
  const double col1[4] = {-2.0, 4.0, 0.0, 0.0};
  const double col2[4] = {-2.0, 4.0, 2.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    CHECK(res.psi.values(i, 0) == col1[i]);
    CHECK(res.psi.values(i, 1) == col2[i]);
  }
  const double tau1 = (-2.0 + 4.0) / 4.0;
  const double tau2 = (-2.0 + 4.0 + 2.0) / 4.0;
  CHECK(res.est.tau_hat(0) == doctest::Approx(tau1));
  CHECK(res.est.tau_hat(1) == doctest::Approx(tau2));
  double s11 = 0.0, s12 = 0.0, s22 = 0.0;
  for (int i = 0; i < 4; ++i) {
    s11 += (col1[i] - tau1) * (col1[i] - tau1);
    s12 += (col1[i] - tau1) * (col2[i] - tau2);
    s22 += (col2[i] - tau2) * (col2[i] - tau2);
  }
  CHECK(res.est.sigma_hat(0, 0) == doctest::Approx(s11 / 4.0));
  CHECK(res.est.sigma_hat(0, 1) == doctest::Approx(s12 / 4.0));
  CHECK(res.est.sigma_hat(1, 0) == doctest::Approx(s12 / 4.0));
  CHECK(res.est.sigma_hat(1, 1) == doctest::Approx(s22 / 4.0));
}

TEST_CASE("covariance is positive semidefinite") {
  const Dataset data = generate({DgpId::DGP2, 500, 8});
  const auto folds = k_fold_indices(500, 5, 9);
  const auto nuis = fit_cross_fitted(data, folds, NuisanceModelSpec{});
  std::vector<double> grid;
  for (int j = 0; j < 21; ++j) grid.push_back(-2.0 + 0.2 * j);
  const auto res = estimate_policy_diffs(data, grid, -2.0, nuis, folds);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.est.sigma_hat);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("doubly-robust estimate collapses to IPW when mu is zero") {
  const Dataset data = generate({DgpId::DGP1, 400, 10});
  const auto folds = trivial_folds(400, 4);
  const auto nuis = FittedNuisance::from_functions(
      4, [](int, const Observation&) { return 0.0; },
      [](const Observation&) { return 0.37; });
  std::vector<double> grid;
  for (int j = 0; j < 11; ++j) grid.push_back(-2.0 + 0.4 * j);

  const auto dr = estimate_policy_diffs(data, grid, 2.0, nuis, folds);
  const auto ipw = ipw_policy_diffs(data, grid, 2.0, 0.37);
  for (int j = 0; j < 11; ++j) {
    CHECK(std::fabs(dr.est.tau_hat(j) - ipw.est.tau_hat(j)) <= 1e-12);
    for (int q = 0; q < 11; ++q) {
      CHECK(std::fabs(dr.est.sigma_hat(j, q) - ipw.est.sigma_hat(j, q)) <= 1e-12);
    }
  }
}

TEST_CASE("ipw contributions on all-control data") {
  std::vector<Observation> obs;
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    obs.push_back(make_obs(rng.uniform(), 0, rng.normal()));
  }
  const Dataset data(std::move(obs), 1);
  const auto res = ipw_policy_diffs(data, {0.7}, 0.0, 0.5);
  double expect = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double s = data[i].score;
    expect += (s > 0.0 && s < 0.7) ? 2.0 * data[i].outcome : 0.0;
  }
  CHECK(res.est.tau_hat(0) == doctest::Approx(expect / 50.0));
  CHECK_THROWS_AS(ipw_policy_diffs(data, {0.7}, 0.0, 1.0), std::domain_error);
}

TEST_CASE("estimation rejects bad inputs") {
  const Dataset data = generate({DgpId::DGP1, 20, 1});
  const auto folds = trivial_folds(20, 2);
  const auto nuis = zero_mu_half_e();
  CHECK_THROWS_AS(estimate_policy_diffs(data, {}, 2.0, nuis, folds),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      estimate_policy_diffs(Dataset(), {0.0}, 2.0, nuis, folds),
      std::invalid_argument);
  CHECK_THROWS_AS(
      estimate_policy_diffs(data, {0.0}, 2.0, nuis, trivial_folds(10, 2)),
      std::invalid_argument);
}

TEST_CASE("unbiased at the oracle nuisance") {
  const TrueValueOracle oracle{DgpId::DGP1, 2.0};
  const double truth = true_policy_diff(oracle, 0.0);
  const auto nuis = oracle_nuisance(DgpId::DGP1, 2);
  const int reps = 500, n = 400;
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const Dataset data = generate({DgpId::DGP1, n, derive_seed(77, r)});
    const auto res =
        estimate_policy_diffs(data, {0.0}, 2.0, nuis, trivial_folds(n, 2));
    sum += res.est.tau_hat(0);
    sumsq += res.est.tau_hat(0) * res.est.tau_hat(0);
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(sumsq / reps - mean * mean);
  CHECK(std::fabs(mean - truth) <= 4.0 * sd / std::sqrt(double(reps)));
}

TEST_CASE("cross-fitted estimate recovers the analytic truth at scale") {
  const Dataset data = generate({DgpId::DGP1, 30000, 123});
  const auto folds = k_fold_indices(30000, 5, 124);
  const auto nuis = fit_cross_fitted(data, folds, NuisanceModelSpec{});
  const auto res = estimate_policy_diffs(data, {0.0}, 2.0, nuis, folds);
  const double se = std::sqrt(res.est.sigma_hat(0, 0) / 30000);
  CHECK(std::fabs(res.est.tau_hat(0) - 0.5) <= 4.0 * se);
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  const Dataset data = generate({DgpId::DGP2, 700, 20});
  const auto folds = k_fold_indices(700, 5, 21);
  NuisanceModelSpec spec;
  spec.basis = Basis::RawPlusScoreIndicators;
  spec.indicator_thresholds = {-1.5, 1.5};
  const auto nuis = fit_cross_fitted(data, folds, spec);
  std::vector<double> grid;
  for (int j = 0; j < 9; ++j) grid.push_back(-2.0 + 0.5 * j);

  const auto fast = estimate_policy_diffs(data, grid, -2.0, nuis, folds);
  const auto slow = reference::estimate_policy_diffs(data, grid, -2.0, nuis, folds);
  CHECK(fast.psi.values == slow.psi.values);
  CHECK(fast.est.tau_hat == slow.est.tau_hat);
  CHECK(fast.est.sigma_hat == slow.est.sigma_hat);
}

TEST_SUITE_END();
