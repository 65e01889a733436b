#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cspi/estimator.hpp"
#include "cspi/inference.hpp"

namespace cspi {

struct CandidateDiagnostic {
  double cutoff = 0.0;
  double tau = 0.0;
  double sd = 0.0;         // sqrt of the per-observation variance
  double pass_prob = 0.0;
  double eta = 0.0;        // |correlation| with the anchor (multi only)
  bool eligible = false;   // tau >= tau(anchor) (multi only)
};

struct SelectionResult {
  std::vector<double> chosen;            // ascending; singleton for single
  Eigen::VectorXd pass_probs;            // over the full grid
  std::vector<CandidateDiagnostic> diagnostics;
  double anchor = 0.0;                   // c1*, the initial cutoff
};

// Forecast of clearing the test-split safety bound, evaluated from
// tuning-split moments as if n_test samples were available:
// Phi(tau * sqrt(n_test / sigma2) - qnorm(1 - gamma)). A zero variance
// degenerates to the sign of tau.
double passing_probability(double tau, double sigma2, int n_test, double gamma);

// Pick the grid cutoff maximizing pass_prob * tau. Ties break toward the
// smaller |c - baseline|, then the smaller cutoff.
SelectionResult select_single(const PolicyDiffEstimate& est, double gamma,
                              int n_test);

// Greedy simultaneous selection: anchor on the highest passing probability,
// rank candidates with tau >= tau(anchor) by |correlation| with the anchor,
// and grow the set while every tentative simultaneous lower bound stays
// above zero; the first rejected candidate stops the loop. One batch of
// normal draws over the eligible set is shared across iterations.
SelectionResult select_multi(const PolicyDiffEstimate& est, double gamma,
                             int n_test, const CriticalValueSpec& spec);

}  // namespace cspi
