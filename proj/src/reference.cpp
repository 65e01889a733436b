#include "cspi/reference.hpp"

#include <limits>
#include <stdexcept>

#include "cspi/rng.hpp"

namespace cspi::reference {

PolicyDiffResult estimate_policy_diffs(
    const Dataset& data, const std::vector<double>& cutoffs, double c0,
    const FittedNuisance& nuisance, const std::vector<std::vector<int>>& folds) {
  const int n = data.size();
  const int l = static_cast<int>(cutoffs.size());
  if (n == 0 || l == 0) {
    throw std::invalid_argument("reference estimator: empty input");
  }
  std::vector<int> fold_of(n, -1);
  for (size_t f = 0; f < folds.size(); ++f) {
    for (int i : folds[f]) fold_of[i] = static_cast<int>(f);
  }

  PolicyDiffResult out;
  out.est.cutoffs = cutoffs;
  out.est.baseline = c0;
  out.est.n = n;
  out.psi.values.resize(n, l);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < l; ++j) {
      out.psi.values(i, j) =
          influence_contribution(data[i], cutoffs[j], c0, nuisance, fold_of[i]);
    }
  }

  out.est.tau_hat.resize(l);
  for (int j = 0; j < l; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += out.psi.values(i, j);
    out.est.tau_hat(j) = sum / n;
  }

  out.est.sigma_hat.resize(l, l);
  for (int p = 0; p < l; ++p) {
    for (int q = p; q < l; ++q) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        sum += (out.psi.values(i, p) - out.est.tau_hat(p)) *
               (out.psi.values(i, q) - out.est.tau_hat(q));
      }
      out.est.sigma_hat(p, q) = sum / n;
      out.est.sigma_hat(q, p) = out.est.sigma_hat(p, q);
    }
  }
  return out;
}

std::vector<double> supt_minima(const Eigen::MatrixXd& sqrt_sigma,
                                const Eigen::VectorXd& sds, int n_sim,
                                uint64_t seed) {
  const int l = static_cast<int>(sqrt_sigma.rows());
  std::vector<double> minima(n_sim);
  Eigen::VectorXd u(l);
  for (int r = 0; r < n_sim; ++r) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(r)));
    for (int j = 0; j < l; ++j) u(j) = rng.normal();
    const Eigen::VectorXd v = sqrt_sigma * u;
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < l; ++j) {
      if (sds(j) > 0.0) m = std::min(m, v(j) / sds(j));
    }
    minima[r] = m;
  }
  return minima;
}

}  // namespace cspi::reference
