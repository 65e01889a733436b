#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "cspi/estimator.hpp"
#include "cspi/normal.hpp"

namespace cspi {

struct CriticalValueSpec {
  int n_sim = 10000;
  uint64_t seed = 0;
};

struct CriticalValue {
  double value = 0.0;
  bool degenerate = false;  // all-zero covariance fallback was taken
};

// Outcome of a safety test over one or more cutoffs.
struct SafetyDecision {
  std::vector<double> cutoffs;
  Eigen::VectorXd lower_bounds;
  double critical_value = 0.0;
  double gamma = 0.0;
  std::vector<bool> passed;  // entrywise lower_bounds > 0
  int n_test = 0;
};

// Symmetric PSD square root via eigendecomposition, escalating a diagonal
// jitter from 1e-12 to 1e-8 when the matrix is numerically indefinite;
// residual negative eigenvalues are clamped to zero.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& sigma);

// Simulated critical value for simultaneous one-sided lower bounds:
// draw V ~ N(0, sigma) n_sim times, standardize each coordinate by its own
// standard deviation, take the per-draw minimum, locate the empirical
// lower-gamma quantile at index floor(gamma * n_sim) of the ascending
// minima, and return its absolute value. Coordinates with zero variance are
// skipped; an all-zero covariance yields the single-test critical value
// with the degenerate flag set. Deterministic given spec.seed and
// independent of the worker count.
CriticalValue simulate_sup_t_critical(const Eigen::MatrixXd& sigma,
                                      double gamma,
                                      const CriticalValueSpec& spec);

// One-cutoff test: lower bound tau - qnorm(1-gamma) * sqrt(sigma / n_test).
SafetyDecision single_cutoff_test(const PolicyDiffEstimate& est, double gamma,
                                  int n_test);

// Simultaneous test: lower bounds tau_j - z* sqrt(sigma_jj) / sqrt(n_test)
// with z* from simulate_sup_t_critical. Reduces to single_cutoff_test for
// one cutoff as n_sim grows.
SafetyDecision multi_cutoff_test(const PolicyDiffEstimate& est, double gamma,
                                 int n_test, const CriticalValueSpec& spec);

}  // namespace cspi
