#include "cspi/estimator.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cspi/parallel.hpp"

namespace cspi {

namespace {

std::vector<int> fold_of_each(int n, const std::vector<std::vector<int>>& folds) {
  std::vector<int> fold_of(n, -1);
  for (size_t f = 0; f < folds.size(); ++f) {
    for (int i : folds[f]) {
      if (i < 0 || i >= n || fold_of[i] != -1) {
        throw std::invalid_argument(
            "estimate_policy_diffs: folds must partition the dataset");
      }
      fold_of[i] = static_cast<int>(f);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (fold_of[i] == -1) {
      throw std::invalid_argument(
          "estimate_policy_diffs: observation " + std::to_string(i) +
          " is not assigned to any fold");
    }
  }
  return fold_of;
}

// Shared moment/back-end given the per-observation base values
// b_i = psi0_i - psi1_i: the influence matrix factors as
// psi[i][j] = interval_weight(s_i, c_j, c0) * b_i.
PolicyDiffResult assemble(const Dataset& data,
                          const std::vector<double>& cutoffs, double c0,
                          const std::vector<double>& base) {
  const int n = data.size();
  const int l = static_cast<int>(cutoffs.size());
  const int threads = thread_limit();

  PolicyDiffResult out;
  out.est.cutoffs = cutoffs;
  out.est.baseline = c0;
  out.est.n = n;
  out.psi.values.resize(n, l);

  Eigen::MatrixXd& psi = out.psi.values;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    const double s = data[i].score;
    for (int j = 0; j < l; ++j) {
      const double w = interval_weight(s, cutoffs[j], c0);
      psi(i, j) = w == 0.0 ? 0.0 : w * base[i];
    }
  }

  // Column means and centered cross-products accumulate in row order so
  // results do not depend on the number of threads.
  out.est.tau_hat.resize(l);
  Eigen::VectorXd& tau = out.est.tau_hat;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int j = 0; j < l; ++j) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += psi(i, j);
    tau(j) = sum / n;
  }

  out.est.sigma_hat.resize(l, l);
  Eigen::MatrixXd& sigma = out.est.sigma_hat;
  const int pairs = l * (l + 1) / 2;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int t = 0; t < pairs; ++t) {
    // Unpack flat upper-triangle index.
    int p = 0;
    int rem = t;
    while (rem >= l - p) {
      rem -= l - p;
      ++p;
    }
    const int q = p + rem;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += (psi(i, p) - tau(p)) * (psi(i, q) - tau(q));
    }
    sigma(p, q) = sum / n;
    if (p != q) sigma(q, p) = sigma(p, q);
  }
  return out;
}

void check_inputs(const Dataset& data, const std::vector<double>& cutoffs) {
  if (data.size() == 0) {
    throw std::invalid_argument("policy diff estimation: empty dataset");
  }
  if (cutoffs.empty()) {
    throw std::invalid_argument("policy diff estimation: empty cutoff vector");
  }
}

}  // namespace

double influence_contribution(const Observation& obs, double c, double c0,
                              const FittedNuisance& nuisance, int fold) {
  const double w = interval_weight(obs.score, c, c0);
  if (w == 0.0) return 0.0;
  const double mu1 = predict(nuisance, fold, 1, obs);
  const double mu0 = predict(nuisance, fold, 0, obs);
  const double e = predict_propensity(nuisance, fold, obs);
  return w * dr_base(obs, mu1, mu0, e);
}

PolicyDiffResult estimate_policy_diffs(
    const Dataset& data, const std::vector<double>& cutoffs, double c0,
    const FittedNuisance& nuisance, const std::vector<std::vector<int>>& folds) {
  check_inputs(data, cutoffs);
  const int n = data.size();
  const std::vector<int> fold_of = fold_of_each(n, folds);

  std::vector<double> base(n);
  const int threads = thread_limit();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    const Observation& o = data[i];
    const int f = fold_of[i];
    const double mu1 = predict(nuisance, f, 1, o);
    const double mu0 = predict(nuisance, f, 0, o);
    const double e = predict_propensity(nuisance, f, o);
    base[i] = dr_base(o, mu1, mu0, e);
  }
  return assemble(data, cutoffs, c0, base);
}

PolicyDiffResult ipw_policy_diffs(
    const Dataset& data, const std::vector<double>& cutoffs, double c0,
    const std::function<double(const Observation&)>& propensity) {
  check_inputs(data, cutoffs);
  const int n = data.size();
  std::vector<double> base(n);
  for (int i = 0; i < n; ++i) {
    const double e = propensity(data[i]);
    if (!(e > 0.0 && e < 1.0)) {
      throw std::domain_error(
          "ipw_policy_diffs: propensity outside (0, 1) at row " +
          std::to_string(i));
    }
    base[i] = ipw_base(data[i], e);
  }
  return assemble(data, cutoffs, c0, base);
}

PolicyDiffResult ipw_policy_diffs(const Dataset& data,
                                  const std::vector<double>& cutoffs,
                                  double c0, double constant_propensity) {
  return ipw_policy_diffs(
      data, cutoffs, c0,
      [constant_propensity](const Observation&) { return constant_propensity; });
}

}  // namespace cspi
