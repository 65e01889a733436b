#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cspi/dgp.hpp"
#include "cspi/rng.hpp"

using namespace cspi;

namespace {

// Midpoint-rule quadrature of the score effect over (lo, hi); independent
// of the closed-form antiderivatives in true_policy_diff.
double quadrature_tau(DgpId dgp, double c, double c0, int steps = 200000) {
  if (c == c0) return 0.0;
  const double lo = std::min(c, c0);
  const double hi = std::max(c, c0);
  const double h = (hi - lo) / steps;
  double integral = 0.0;
  for (int i = 0; i < steps; ++i) {
    integral += score_effect(dgp, lo + (i + 0.5) * h) * h;
  }
  return (c < c0 ? 1.0 : -1.0) * integral / 4.0;
}

std::filesystem::path temp_csv(const std::string& name,
                               const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_SUITE_BEGIN("dgp");

TEST_CASE("score effects take their stated shapes") {
  CHECK(score_effect(DgpId::DGP1, 0.7) == 0.7);
  CHECK(score_effect(DgpId::DGP2, 1.5) == 4.0);
  CHECK(score_effect(DgpId::DGP2, 1.4) == 0.0);
  CHECK(score_effect(DgpId::DGP2, -1.5) == -2.0);
  CHECK(score_effect(DgpId::DGP2, -1.6) == -2.0);
  CHECK(score_effect(DgpId::DGP2, 0.0) == 0.0);
  CHECK(score_effect(DgpId::DGP3, 1.0) == -0.25);
}

TEST_CASE("generator is deterministic per seed") {
  const Dataset a = generate({DgpId::DGP1, 50, 9});
  const Dataset b = generate({DgpId::DGP1, 50, 9});
  const Dataset c = generate({DgpId::DGP1, 50, 10});
  bool same = true, differ = false;
  for (int i = 0; i < 50; ++i) {
    same = same && a[i].outcome == b[i].outcome && a[i].score == b[i].score;
    differ = differ || a[i].outcome != c[i].outcome;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("generator moments match the declared law") {
  const Dataset data = generate({DgpId::DGP2, 1000000, 4});
  double a_sum = 0.0, x1_sum = 0.0, x1_sq = 0.0, s_min = 10.0, s_max = -10.0;
  for (int i = 0; i < data.size(); ++i) {
    a_sum += data[i].treatment;
    const double x1 = data[i].covariates[1];
    x1_sum += x1;
    x1_sq += x1 * x1;
    s_min = std::min(s_min, data[i].score);
    s_max = std::max(s_max, data[i].score);
  }
  const int n = data.size();
  const double a_mean = a_sum / n;
  const double x1_mean = x1_sum / n;
  const double x1_var = x1_sq / n - x1_mean * x1_mean;
  CHECK(std::fabs(a_mean - 0.5) < 0.002);
  CHECK(std::fabs(x1_var - 25.0) < 0.2);
  CHECK(s_min >= -2.0);
  CHECK(s_max <= 2.0);
  CHECK(std::fabs(x1_mean) < 0.02);
}

TEST_CASE("closed-form policy differences match quadrature") {
  for (DgpId dgp : {DgpId::DGP1, DgpId::DGP2, DgpId::DGP3}) {
    const TrueValueOracle oracle{dgp, default_baseline(dgp)};
    for (int j = 0; j <= 40; ++j) {
      const double c = -2.0 + 4.0 * j / 40.0;
      CHECK(std::fabs(true_policy_diff(oracle, c) -
                      quadrature_tau(dgp, c, oracle.baseline)) < 1e-3);
    }
  }
}

TEST_CASE("known truth values") {
  const TrueValueOracle d1{DgpId::DGP1, 2.0};
  CHECK(true_policy_diff(d1, 2.0) == 0.0);
  CHECK(true_policy_diff(d1, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(true_policy_diff(d1, -2.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(true_policy_diff(d1, 1.0) == doctest::Approx(3.0 / 8.0).epsilon(1e-12));

  const TrueValueOracle d2{DgpId::DGP2, -2.0};
  CHECK(true_policy_diff(d2, 1.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(true_policy_diff(d2, 2.0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(true_policy_diff(d2, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(true_policy_diff(d2, -2.0) == 0.0);

  const TrueValueOracle d3{DgpId::DGP3, 2.0};
  for (int j = 0; j <= 40; ++j) {
    const double c = -2.0 + 4.0 * j / 40.0;
    CHECK(true_policy_diff(d3, c) <= 0.0);
    CHECK(true_policy_diff(d3, c) ==
          doctest::Approx(-0.25 * (2.0 - c) / 4.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(true_policy_diff(d1, 2.5), std::invalid_argument);
}

TEST_CASE("monte-carlo potential outcomes agree with the closed form") {
  // Antithetic pairs on X1 cancel its mean-zero contribution exactly, so
  // desk-scale draws suffice. The unit-level noise cancels in the pairing
  // of potential outcomes.
  for (DgpId dgp : {DgpId::DGP1, DgpId::DGP2, DgpId::DGP3}) {
    const TrueValueOracle oracle{dgp, default_baseline(dgp)};
    const double cutoffs[] = {-1.7, -0.4, 0.9, 1.6};
    Rng rng(11);
    const int pairs = 100000;
    double sums[4] = {};
    for (int r = 0; r < pairs; ++r) {
      const double s = -2.0 + 4.0 * rng.uniform();
      const double x1 = 5.0 * rng.normal();
      for (double sign : {1.0, -1.0}) {
        const double gain = score_effect(dgp, s) - 4.0 * sign * x1;
        for (int k = 0; k < 4; ++k) {
          const double treat_new = s >= cutoffs[k] ? 1.0 : 0.0;
          const double treat_base = s >= oracle.baseline ? 1.0 : 0.0;
          sums[k] += (treat_new - treat_base) * gain;
        }
      }
    }
    for (int k = 0; k < 4; ++k) {
      CHECK(std::fabs(sums[k] / (2.0 * pairs) -
                      true_policy_diff(oracle, cutoffs[k])) < 0.01);
    }
  }
}

TEST_CASE("csv loads by header name with weights") {
  const auto path = temp_csv(
      "cspi_ok.csv",
      "age,arm,y,w,extra\n41,1,0.5,2.0,9\n1.9e1,0,-3,1.0,8\n22,1,4,0,7\n");
  CsvSchema schema;
  schema.score = "age";
  schema.treatment = "arm";
  schema.outcome = "y";
  schema.weight = "w";
  schema.covariates = {"age", "extra"};
  const ExternalTable table = load_csv(path.string(), schema);
  CHECK(table.n == 3);
  CHECK(table.d == 2);
  CHECK(table.scores[1] == 19.0);  // scientific notation accepted
  CHECK(table.treatments[1] == 0);
  CHECK(table.weights[2] == 0.0);
  CHECK(table.covariates[0][1] == 9.0);

  const Dataset data = to_dataset(table);
  CHECK(data.size() == 3);
  CHECK(data.dim() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("csv rejects malformed rows with their row number") {
  const auto bad_field = temp_csv("cspi_badfield.csv", "s,a,y\n1,1,ok\n");
  CsvSchema schema;
  schema.score = "s";
  schema.treatment = "a";
  schema.outcome = "y";
  CHECK_THROWS_WITH_AS(load_csv(bad_field.string(), schema),
                       doctest::Contains("row 2"), std::runtime_error);

  const auto bad_arm = temp_csv("cspi_badarm.csv", "s,a,y\n1,1,2\n1,3,2\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_arm.string(), schema),
                       doctest::Contains("row 3"), std::runtime_error);

  const auto short_row = temp_csv("cspi_short.csv", "s,a,y\n1,1\n");
  CHECK_THROWS_AS(load_csv(short_row.string(), schema), std::runtime_error);

  const auto neg_weight = temp_csv("cspi_negw.csv", "s,a,y,w\n1,1,2,-1\n");
  CsvSchema with_weight = schema;
  with_weight.weight = "w";
  CHECK_THROWS_WITH_AS(load_csv(neg_weight.string(), with_weight),
                       doctest::Contains("negative"), std::runtime_error);

  const auto missing = temp_csv("cspi_missing.csv", "s,a\n1,1\n");
  CHECK_THROWS_WITH_AS(load_csv(missing.string(), schema),
                       doctest::Contains("'y'"), std::runtime_error);

  for (const auto& p : {bad_field, bad_arm, short_row, neg_weight, missing}) {
    std::filesystem::remove(p);
  }
}

TEST_CASE("bootstrap follows the sample weights") {
  ExternalTable table;
  table.n = 2;
  table.d = 0;
  table.scores = {1.0, 2.0};
  table.treatments = {0, 1};
  table.outcomes = {10.0, 20.0};
  table.weights = {1.0, 0.0};
  table.covariates = {{}, {}};

  const Dataset all_first = bootstrap_sample(table, 50, 3);
  for (int i = 0; i < all_first.size(); ++i) {
    CHECK(all_first[i].score == 1.0);
  }

  table.weights.clear();  // uniform
  const Dataset a = bootstrap_sample(table, 100, 5);
  const Dataset b = bootstrap_sample(table, 100, 5);
  int firsts = 0;
  bool same = true;
  for (int i = 0; i < 100; ++i) {
    firsts += a[i].score == 1.0 ? 1 : 0;
    same = same && a[i].score == b[i].score;
  }
  CHECK(same);
  CHECK(firsts > 20);
  CHECK(firsts < 80);
}

TEST_SUITE_END();
