#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "cspi/core.hpp"
#include "cspi/estimator.hpp"
#include "cspi/nuisance.hpp"

// Straight-line serial implementations of the parallel kernels. They share
// the arithmetic order of the OpenMP versions, so results must match
// bit-for-bit; tests and the kernel benchmark rely on that.
namespace cspi::reference {

PolicyDiffResult estimate_policy_diffs(const Dataset& data,
                                       const std::vector<double>& cutoffs,
                                       double c0,
                                       const FittedNuisance& nuisance,
                                       const std::vector<std::vector<int>>& folds);

// Standardized per-draw minima for the sup-t critical value: draw
// V ~ N(0, sqrt_sigma * sqrt_sigma^T) per replicate and record
// min over coordinates with sd > 0 of V_j / sd_j.
std::vector<double> supt_minima(const Eigen::MatrixXd& sqrt_sigma,
                                const Eigen::VectorXd& sds, int n_sim,
                                uint64_t seed);

}  // namespace cspi::reference
