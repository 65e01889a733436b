#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "cspi/core.hpp"
#include "cspi/nuisance.hpp"

namespace cspi {

// Policy-difference estimates for a cutoff set against a common baseline.
// sigma_hat holds the per-observation covariance of the influence
// contributions (the variance of psi), NOT divided by n: consumers rescale
// by the relevant sample count themselves.
struct PolicyDiffEstimate {
  std::vector<double> cutoffs;
  double baseline = 0.0;
  Eigen::VectorXd tau_hat;
  Eigen::MatrixXd sigma_hat;
  int n = 0;
};

// Per-observation contributions, one column per cutoff. Retained so
// covariance sub-blocks over arbitrary cutoff subsets stay available
// without re-estimation.
struct InfluenceMatrix {
  Eigen::MatrixXd values;  // n x l
};

struct PolicyDiffResult {
  PolicyDiffEstimate est;
  InfluenceMatrix psi;
};

// Direction and membership wrapper: +1 if baseline < c, -1 otherwise,
// times the open-interval indicator 1[s in (min(c0,c), max(c0,c))].
// Scores exactly on an endpoint contribute zero.
inline double interval_weight(double s, double c, double c0) {
  const double lo = c0 < c ? c0 : c;
  const double hi = c0 < c ? c : c0;
  if (!(s > lo && s < hi)) return 0.0;
  return c0 < c ? 1.0 : -1.0;
}

// Doubly-robust arm scores: psi0 - psi1 evaluated at predictions
// (mu1, mu0) and propensity e in (0, 1).
inline double dr_base(const Observation& o, double mu1, double mu0, double e) {
  const double a = static_cast<double>(o.treatment);
  const double psi1 = o.outcome * a / e - mu1 * (a - e) / e;
  const double psi0 =
      o.outcome * (1.0 - a) / (1.0 - e) - mu0 * (e - a) / (1.0 - e);
  return psi0 - psi1;
}

// Importance-weighted arm scores: psi0 - psi1 with no outcome model.
inline double ipw_base(const Observation& o, double e) {
  const double a = static_cast<double>(o.treatment);
  const double psi1 = o.outcome * a / e;
  const double psi0 = o.outcome * (1.0 - a) / (1.0 - e);
  return psi0 - psi1;
}

// Single-observation influence contribution using fold-specific predictors.
double influence_contribution(const Observation& obs, double c, double c0,
                              const FittedNuisance& nuisance, int fold);

// Cross-fitted policy-difference vector and sampling covariance over a
// cutoff set. Each observation is scored with its own fold's held-out
// predictors. OpenMP-parallel; results are invariant to the thread count.
PolicyDiffResult estimate_policy_diffs(const Dataset& data,
                                       const std::vector<double>& cutoffs,
                                       double c0,
                                       const FittedNuisance& nuisance,
                                       const std::vector<std::vector<int>>& folds);

// Importance-weighted variant with a caller-supplied propensity (no
// cross-fitting). The propensity must map into (0, 1).
PolicyDiffResult ipw_policy_diffs(
    const Dataset& data, const std::vector<double>& cutoffs, double c0,
    const std::function<double(const Observation&)>& propensity);

PolicyDiffResult ipw_policy_diffs(const Dataset& data,
                                  const std::vector<double>& cutoffs,
                                  double c0, double constant_propensity);

}  // namespace cspi
