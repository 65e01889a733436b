#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cspi/normal.hpp"
#include "cspi/rng.hpp"

using namespace cspi;

TEST_SUITE_BEGIN("normal");

TEST_CASE("quantile at the median is zero") {
  CHECK(std_normal_quantile(0.5) == 0.0);
}

TEST_CASE("quantile matches tabulated two-sided 95% point") {
  CHECK(std::fabs(std_normal_quantile(0.975) - 1.959964) < 1e-5);
  CHECK(std::fabs(std_normal_quantile(0.95) - 1.6448536) < 1e-5);
  CHECK(std::fabs(std_normal_quantile(0.99) - 2.3263479) < 1e-5);
}

TEST_CASE("cdf basics") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(std_normal_cdf(-10.0) < 1e-20);
  CHECK(std_normal_cdf(10.0) >= 1.0 - 1e-15);
}

TEST_CASE("cdf and quantile invert each other") {
  const double ps[] = {1e-8, 1e-6, 1e-4, 0.01, 0.1,  0.25, 0.5,
                       0.75, 0.9,  0.99, 1 - 1e-4, 1 - 1e-6, 1 - 1e-8};
  for (double p : ps) {
    CHECK(std::fabs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-9);
  }
}

TEST_CASE("quantile rejects p outside (0, 1)") {
  CHECK_THROWS_AS(std_normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(std_normal_quantile(1.0), std::invalid_argument);
  CHECK_THROWS_AS(std_normal_quantile(-0.2), std::invalid_argument);
}

TEST_CASE("rng streams are deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool same = true, differ = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    same = same && (x == b.uniform());
    differ = differ || (x != c.uniform());
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("rng normal has standard moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("below() stays in range and covers small supports") {
  Rng rng(3);
  bool seen[5] = {};
  for (int i = 0; i < 1000; ++i) {
    const uint64_t v = rng.below(5);
    REQUIRE(v < 5);
    seen[v] = true;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
  CHECK(derive_seed(5, 9, 0, 1) == derive_seed(5, 9, 0, 1));
}

TEST_SUITE_END();
