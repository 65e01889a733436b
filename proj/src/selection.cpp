#include "cspi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cspi/parallel.hpp"
#include "cspi/rng.hpp"

namespace cspi {

namespace {

void check_args(const PolicyDiffEstimate& est, double gamma, int n_test) {
  if (est.cutoffs.empty()) {
    throw std::invalid_argument("selection: empty cutoff grid");
  }
  if (!(gamma > 0.0 && gamma <= 0.5)) {
    throw std::invalid_argument("selection: gamma must lie in (0, 0.5]");
  }
  if (n_test < 1) throw std::invalid_argument("selection: n_test must be >= 1");
}

// Deterministic argmax: larger value wins; ties prefer the cutoff closer to
// the reference point, then the smaller cutoff.
struct ArgmaxState {
  double value = -std::numeric_limits<double>::infinity();
  double cutoff = 0.0;
  int index = -1;

  void offer(double v, double c, int i, double ref) {
    if (index < 0 || v > value ||
        (v == value && (std::fabs(c - ref) < std::fabs(cutoff - ref) ||
                        (std::fabs(c - ref) == std::fabs(cutoff - ref) &&
                         c < cutoff)))) {
      value = v;
      cutoff = c;
      index = i;
    }
  }
};

double correlation_with(const PolicyDiffEstimate& est, int j, int anchor) {
  const double va = est.sigma_hat(anchor, anchor);
  const double vj = est.sigma_hat(j, j);
  if (!(va > 0.0) || !(vj > 0.0)) return 0.0;  // zero-variance convention
  return std::fabs(est.sigma_hat(j, anchor)) / std::sqrt(vj * va);
}

double lower_quantile_abs(std::vector<double> values, double gamma) {
  size_t idx = static_cast<size_t>(std::floor(gamma * values.size()));
  if (idx >= values.size()) idx = values.size() - 1;
  std::nth_element(values.begin(), values.begin() + idx, values.end());
  return std::fabs(values[idx]);
}

}  // namespace

double passing_probability(double tau, double sigma2, int n_test, double gamma) {
  if (n_test < 1) {
    throw std::invalid_argument("passing_probability: n_test must be >= 1");
  }
  if (!(gamma > 0.0 && gamma <= 0.5)) {
    throw std::invalid_argument("passing_probability: gamma must lie in (0, 0.5]");
  }
  if (!(sigma2 > 0.0)) return tau > 0.0 ? 1.0 : 0.0;
  return std_normal_cdf(tau * std::sqrt(n_test / sigma2) -
                        std_normal_quantile(1.0 - gamma));
}

SelectionResult select_single(const PolicyDiffEstimate& est, double gamma,
                              int n_test) {
  check_args(est, gamma, n_test);
  const int g = static_cast<int>(est.cutoffs.size());

  SelectionResult out;
  out.pass_probs.resize(g);
  out.diagnostics.resize(g);
  ArgmaxState best;
  for (int j = 0; j < g; ++j) {
    const double sigma2 = est.sigma_hat(j, j);
    const double p = passing_probability(est.tau_hat(j), sigma2, n_test, gamma);
    out.pass_probs(j) = p;
    out.diagnostics[j] = {est.cutoffs[j], est.tau_hat(j),
                          std::sqrt(std::max(sigma2, 0.0)), p, 0.0, false};
    best.offer(p * est.tau_hat(j), est.cutoffs[j], j, est.baseline);
  }
  out.chosen = {best.cutoff};
  out.anchor = best.cutoff;
  return out;
}

SelectionResult select_multi(const PolicyDiffEstimate& est, double gamma,
                             int n_test, const CriticalValueSpec& spec) {
  check_args(est, gamma, n_test);
  if (spec.n_sim < 1) {
    throw std::invalid_argument("select_multi: n_sim must be >= 1");
  }
  const int g = static_cast<int>(est.cutoffs.size());

  SelectionResult out;
  out.pass_probs.resize(g);
  out.diagnostics.resize(g);
  ArgmaxState anchor;
  for (int j = 0; j < g; ++j) {
    const double sigma2 = est.sigma_hat(j, j);
    const double p = passing_probability(est.tau_hat(j), sigma2, n_test, gamma);
    out.pass_probs(j) = p;
    out.diagnostics[j] = {est.cutoffs[j], est.tau_hat(j),
                          std::sqrt(std::max(sigma2, 0.0)), p, 0.0, false};
    anchor.offer(p, est.cutoffs[j], j, est.baseline);
  }
  const int a = anchor.index;
  out.anchor = est.cutoffs[a];
  out.diagnostics[a].eligible = true;
  out.diagnostics[a].eta = 1.0;

  // Eligible candidates, ranked by descending |correlation| with the anchor;
  // ties prefer the cutoff nearer the anchor, then the smaller one.
  std::vector<int> cand;
  for (int j = 0; j < g; ++j) {
    if (j == a) continue;
    if (est.tau_hat(j) >= est.tau_hat(a)) {
      cand.push_back(j);
      out.diagnostics[j].eligible = true;
      out.diagnostics[j].eta = correlation_with(est, j, a);
    }
  }
  std::sort(cand.begin(), cand.end(), [&](int x, int y) {
    const double ex = out.diagnostics[x].eta;
    const double ey = out.diagnostics[y].eta;
    if (ex != ey) return ex > ey;
    const double dx = std::fabs(est.cutoffs[x] - est.cutoffs[a]);
    const double dy = std::fabs(est.cutoffs[y] - est.cutoffs[a]);
    if (dx != dy) return dx < dy;
    return est.cutoffs[x] < est.cutoffs[y];
  });

  if (cand.empty()) {
    out.chosen = {est.cutoffs[a]};
    return out;
  }

  // One batch of draws over [anchor] + candidates, reused for every
  // tentative critical value.
  std::vector<int> coords;
  coords.push_back(a);
  coords.insert(coords.end(), cand.begin(), cand.end());
  const int m = static_cast<int>(coords.size());
  Eigen::MatrixXd sub(m, m);
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      sub(p, q) = est.sigma_hat(coords[p], coords[q]);
    }
  }
  Eigen::VectorXd sds(m);
  for (int p = 0; p < m; ++p) sds(p) = std::sqrt(std::max(sub(p, p), 0.0));

  const Eigen::MatrixXd root = symmetric_sqrt(sub);
  Eigen::MatrixXd draws(spec.n_sim, m);
  const int threads = thread_limit();
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int r = 0; r < spec.n_sim; ++r) {
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(r)));
    Eigen::VectorXd u(m);
    for (int j = 0; j < m; ++j) u(j) = rng.normal();
    draws.row(r) = (root * u).transpose();
  }

  const double sqrt_n = std::sqrt(static_cast<double>(n_test));
  std::vector<int> accepted = {0};  // positions within coords
  std::vector<double> minima(spec.n_sim);
  for (int t = 1; t < m; ++t) {
    std::vector<int> temp = accepted;
    temp.push_back(t);

    bool any_sd = false;
    for (int p : temp) any_sd = any_sd || sds(p) > 0.0;
    double z;
    if (!any_sd) {
      z = std_normal_quantile(1.0 - gamma);
    } else {
#pragma omp parallel for schedule(static) num_threads(threads)
      for (int r = 0; r < spec.n_sim; ++r) {
        double mn = std::numeric_limits<double>::infinity();
        for (int p : temp) {
          if (sds(p) > 0.0) mn = std::min(mn, draws(r, p) / sds(p));
        }
        minima[r] = mn;
      }
      z = lower_quantile_abs(minima, gamma);
    }

    bool all_above = true;
    for (int p : temp) {
      const double bound =
          est.tau_hat(coords[p]) - z * sds(p) / sqrt_n;
      if (!(bound > 0.0)) {
        all_above = false;
        break;
      }
    }
    if (!all_above) break;  // first rejection stops the greedy growth
    accepted = std::move(temp);
  }

  out.chosen.reserve(accepted.size());
  for (int p : accepted) out.chosen.push_back(est.cutoffs[coords[p]]);
  std::sort(out.chosen.begin(), out.chosen.end());
  return out;
}

}  // namespace cspi
