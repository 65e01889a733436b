#include "cspi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cspi/parallel.hpp"
#include "cspi/rng.hpp"

namespace cspi {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 0.5)) {
    throw std::invalid_argument("safety test: gamma must lie in (0, 0.5]");
  }
}

}  // namespace

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols()) {
    throw std::invalid_argument("symmetric_sqrt: matrix must be square");
  }
  const int l = static_cast<int>(sigma.rows());
  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  static constexpr double kJitters[] = {0.0, 1e-12, 1e-10, 1e-8};
  for (size_t t = 0; t < std::size(kJitters); ++t) {
    Eigen::MatrixXd m = sym;
    m.diagonal().array() += kJitters[t];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double max_eig = std::max(es.eigenvalues().maxCoeff(), 0.0);
    const double tol = -1e-10 * std::max(1.0, max_eig);
    const bool last = t + 1 == std::size(kJitters);
    if (es.eigenvalues().minCoeff() >= tol || last) {
      Eigen::VectorXd roots(l);
      for (int j = 0; j < l; ++j) {
        roots(j) = std::sqrt(std::max(es.eigenvalues()(j), 0.0));
      }
      return es.eigenvectors() * roots.asDiagonal() *
             es.eigenvectors().transpose();
    }
  }
  return Eigen::MatrixXd::Zero(l, l);  // unreachable
}

CriticalValue simulate_sup_t_critical(const Eigen::MatrixXd& sigma,
                                      double gamma,
                                      const CriticalValueSpec& spec) {
  check_gamma(gamma);
  if (spec.n_sim < 1) {
    throw std::invalid_argument("simulate_sup_t_critical: n_sim must be >= 1");
  }
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw std::invalid_argument("simulate_sup_t_critical: bad covariance shape");
  }
  const int l = static_cast<int>(sigma.rows());
  Eigen::VectorXd sds(l);
  bool any_positive = false;
  for (int j = 0; j < l; ++j) {
    sds(j) = std::sqrt(std::max(sigma(j, j), 0.0));
    any_positive = any_positive || sds(j) > 0.0;
  }
  if (!any_positive) {
    return {std_normal_quantile(1.0 - gamma), true};
  }

  const Eigen::MatrixXd root = symmetric_sqrt(sigma);
  std::vector<double> minima(spec.n_sim);
  const int threads = thread_limit();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int r = 0; r < spec.n_sim; ++r) {
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(r)));
    Eigen::VectorXd u(l);
    for (int j = 0; j < l; ++j) u(j) = rng.normal();
    const Eigen::VectorXd v = root * u;
    double m = std::numeric_limits<double>::infinity();
    for (int j = 0; j < l; ++j) {
      if (sds(j) > 0.0) m = std::min(m, v(j) / sds(j));
    }
    minima[r] = m;
  }

  size_t idx = static_cast<size_t>(std::floor(gamma * spec.n_sim));
  if (idx >= minima.size()) idx = minima.size() - 1;
  std::nth_element(minima.begin(), minima.begin() + idx, minima.end());
  return {std::fabs(minima[idx]), false};
}

SafetyDecision single_cutoff_test(const PolicyDiffEstimate& est, double gamma,
                                  int n_test) {
  check_gamma(gamma);
  if (est.cutoffs.size() != 1) {
    throw std::invalid_argument("single_cutoff_test: estimate must hold exactly one cutoff");
  }
  if (n_test < 1) {
    throw std::invalid_argument("single_cutoff_test: n_test must be >= 1");
  }
  SafetyDecision d;
  d.cutoffs = est.cutoffs;
  d.gamma = gamma;
  d.n_test = n_test;
  d.critical_value = std_normal_quantile(1.0 - gamma);
  d.lower_bounds.resize(1);
  d.lower_bounds(0) =
      est.tau_hat(0) -
      d.critical_value * std::sqrt(std::max(est.sigma_hat(0, 0), 0.0) / n_test);
  d.passed = {d.lower_bounds(0) > 0.0};
  return d;
}

SafetyDecision multi_cutoff_test(const PolicyDiffEstimate& est, double gamma,
                                 int n_test, const CriticalValueSpec& spec) {
  check_gamma(gamma);
  const int l = static_cast<int>(est.cutoffs.size());
  if (l < 1) {
    throw std::invalid_argument("multi_cutoff_test: estimate holds no cutoffs");
  }
  if (n_test < 1) {
    throw std::invalid_argument("multi_cutoff_test: n_test must be >= 1");
  }
  const CriticalValue z = simulate_sup_t_critical(est.sigma_hat, gamma, spec);
  SafetyDecision d;
  d.cutoffs = est.cutoffs;
  d.gamma = gamma;
  d.n_test = n_test;
  d.critical_value = z.value;
  d.lower_bounds.resize(l);
  d.passed.resize(l);
  const double scale = std::sqrt(static_cast<double>(n_test));
  for (int j = 0; j < l; ++j) {
    const double sd = std::sqrt(std::max(est.sigma_hat(j, j), 0.0));
    d.lower_bounds(j) = est.tau_hat(j) - z.value * sd / scale;
    d.passed[j] = d.lower_bounds(j) > 0.0;
  }
  return d;
}

}  // namespace cspi
