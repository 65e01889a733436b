#include "cspi/pipeline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cspi/estimator.hpp"
#include "cspi/rng.hpp"

namespace cspi {

std::string to_string(Method m) {
  switch (m) {
    case Method::CSPI: return "CSPI";
    case Method::CSPI_MT: return "CSPI-MT";
    case Method::HCPI_FINITE: return "HCPI-finite";
    case Method::HCPI_TTEST: return "HCPI-ttest";
    case Method::NAIVE: return "NAIVE";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "CSPI") return Method::CSPI;
  if (name == "CSPI-MT") return Method::CSPI_MT;
  if (name == "HCPI-finite") return Method::HCPI_FINITE;
  if (name == "HCPI-ttest") return Method::HCPI_TTEST;
  if (name == "NAIVE") return Method::NAIVE;
  throw std::invalid_argument("unknown method name: " + name);
}

namespace {

// Sub-stream tags for deriving fold, draw and re-estimation seeds.
enum : uint64_t {
  kTuneFolds = 11,
  kTestFolds = 12,
  kFullFolds = 13,
  kSelectDraws = 21,
  kTestDraws = 22,
};

void validate(const MethodConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 0.5)) {
    throw std::invalid_argument("method config: gamma must lie in (0, 0.5]");
  }
  cfg.grid.validate();
  if (cfg.split.k_folds < 2) {
    throw std::invalid_argument("method config: k_folds must be >= 2");
  }
  if (!(cfg.hcpi_range_bound > 0.0)) {
    throw std::invalid_argument("method config: hcpi_range_bound must be > 0");
  }
  if (!(cfg.hcpi_inflation >= 1.0)) {
    throw std::invalid_argument("method config: hcpi_inflation must be >= 1");
  }
}

PolicyDiffResult cross_fitted_diffs(const Dataset& data,
                                    const std::vector<double>& cutoffs,
                                    const MethodConfig& cfg, uint64_t fold_tag) {
  const auto folds = k_fold_indices(data.size(), cfg.split.k_folds,
                                    derive_seed(cfg.split.seed, fold_tag));
  const auto nuisance = fit_cross_fitted(data, folds, cfg.nuisance);
  return estimate_policy_diffs(data, cutoffs, cfg.grid.baseline, nuisance, folds);
}

double whole_sample_propensity(const Dataset& data) {
  double sum = 0.0;
  for (int i = 0; i < data.size(); ++i) sum += data[i].treatment;
  return sum / data.size();
}

// Deterministic argmax over (value, cutoff) pairs; ties prefer the cutoff
// closer to the baseline, then the smaller one. The baseline itself can be
// seeded as the incumbent with value zero.
struct Argmax {
  double value;
  double cutoff;
  double ref;

  void offer(double v, double c) {
    const bool better =
        v > value ||
        (v == value && (std::fabs(c - ref) < std::fabs(cutoff - ref) ||
                        (std::fabs(c - ref) == std::fabs(cutoff - ref) &&
                         c < cutoff)));
    if (better) {
      value = v;
      cutoff = c;
    }
  }
};

MethodOutcome reverted(const MethodConfig& cfg) {
  MethodOutcome out;
  out.final_cutoff = cfg.grid.baseline;
  out.changed = false;
  return out;
}

// Shared HCPI skeleton: IPW estimates with the whole-sample propensity,
// selection by the inflated predicted lower bound on the tuning split and a
// plain lower-bound test on the test split.
MethodOutcome run_hcpi(const Dataset& data, const MethodConfig& cfg,
                       bool finite_sample) {
  validate(cfg);
  const double e_hat = whole_sample_propensity(data);
  if (!(e_hat > 0.0 && e_hat < 1.0)) {
    throw std::runtime_error("HCPI: sample-mean propensity is degenerate (" +
                             std::to_string(e_hat) + ")");
  }
  auto [tune, test] = split_tune_test(data, cfg.split);
  const int n_test = test.size();
  const auto est_tune =
      ipw_policy_diffs(tune, cfg.grid.cutoffs, cfg.grid.baseline, e_hat);

  const double log_term = std::sqrt(2.0 * std::log(1.0 / cfg.gamma));
  const double z_gamma = std_normal_quantile(1.0 - cfg.gamma);
  const double sqrt_n = std::sqrt(static_cast<double>(n_test));

  MethodOutcome out = reverted(cfg);
  Argmax best{-std::numeric_limits<double>::infinity(), cfg.grid.cutoffs[0],
              cfg.grid.baseline};
  const int g = static_cast<int>(cfg.grid.cutoffs.size());
  out.selection.diagnostics.resize(g);
  for (int j = 0; j < g; ++j) {
    const double tau = est_tune.est.tau_hat(j);
    const double sd = std::sqrt(std::max(est_tune.est.sigma_hat(j, j), 0.0));
    double predicted;
    if (finite_sample) {
      predicted = tau - cfg.hcpi_inflation * cfg.hcpi_range_bound * log_term / sqrt_n;
    } else {
      predicted = tau - cfg.hcpi_inflation * z_gamma * sd / sqrt_n;
    }
    out.selection.diagnostics[j] = {cfg.grid.cutoffs[j], tau, sd, 0.0, 0.0, false};
    best.offer(predicted, cfg.grid.cutoffs[j]);
  }
  const double chosen = best.cutoff;
  out.selection.chosen = {chosen};
  out.selection.anchor = chosen;

  const auto est_test =
      ipw_policy_diffs(test, {chosen}, cfg.grid.baseline, e_hat);
  if (finite_sample) {
    SafetyDecision d;
    d.cutoffs = {chosen};
    d.gamma = cfg.gamma;
    d.n_test = n_test;
    d.critical_value = log_term;
    d.lower_bounds.resize(1);
    d.lower_bounds(0) =
        est_test.est.tau_hat(0) - cfg.hcpi_range_bound * log_term / sqrt_n;
    d.passed = {d.lower_bounds(0) > 0.0};
    out.decision = d;
  } else {
    out.decision = single_cutoff_test(est_test.est, cfg.gamma, n_test);
  }

  if (out.decision.passed[0]) {
    out.passed_set = {chosen};
    out.final_cutoff = chosen;
    out.changed = chosen != cfg.grid.baseline;
  }
  return out;
}

}  // namespace

MethodOutcome run_cspi(const Dataset& data, const MethodConfig& cfg) {
  validate(cfg);
  auto [tune, test] = split_tune_test(data, cfg.split);
  const auto est_tune = cross_fitted_diffs(tune, cfg.grid.cutoffs, cfg, kTuneFolds);

  MethodOutcome out = reverted(cfg);
  out.selection = select_single(est_tune.est, cfg.gamma, test.size());
  const double chosen = out.selection.chosen[0];

  const auto est_test = cross_fitted_diffs(test, {chosen}, cfg, kTestFolds);
  out.decision = single_cutoff_test(est_test.est, cfg.gamma, test.size());
  if (out.decision.passed[0]) {
    out.passed_set = {chosen};
    out.final_cutoff = chosen;
    out.changed = chosen != cfg.grid.baseline;
  }
  return out;
}

MethodOutcome run_cspi_mt(const Dataset& data, const MethodConfig& cfg) {
  validate(cfg);
  auto [tune, test] = split_tune_test(data, cfg.split);
  const auto est_tune = cross_fitted_diffs(tune, cfg.grid.cutoffs, cfg, kTuneFolds);

  MethodOutcome out = reverted(cfg);
  out.selection = select_multi(
      est_tune.est, cfg.gamma, test.size(),
      {cfg.critical.n_sim, derive_seed(cfg.critical.seed, kSelectDraws)});

  const auto est_test =
      cross_fitted_diffs(test, out.selection.chosen, cfg, kTestFolds);
  out.decision = multi_cutoff_test(
      est_test.est, cfg.gamma, test.size(),
      {cfg.critical.n_sim, derive_seed(cfg.critical.seed, kTestDraws)});

  for (size_t j = 0; j < out.selection.chosen.size(); ++j) {
    if (out.decision.passed[j]) {
      out.passed_set.push_back(out.selection.chosen[j]);
    }
  }
  if (out.passed_set.empty()) return out;

  double final_cutoff = out.passed_set[0];
  if (out.passed_set.size() > 1) {
    // Most accurate gain estimate: fresh cross-fit on the whole dataset.
    const auto est_full = cross_fitted_diffs(data, out.passed_set, cfg, kFullFolds);
    Argmax best{-std::numeric_limits<double>::infinity(), out.passed_set[0],
                cfg.grid.baseline};
    for (size_t j = 0; j < out.passed_set.size(); ++j) {
      best.offer(est_full.est.tau_hat(static_cast<int>(j)), out.passed_set[j]);
    }
    final_cutoff = best.cutoff;
  }
  out.final_cutoff = final_cutoff;
  out.changed = final_cutoff != cfg.grid.baseline;
  return out;
}

MethodOutcome run_hcpi_finite(const Dataset& data, const MethodConfig& cfg) {
  return run_hcpi(data, cfg, true);
}

MethodOutcome run_hcpi_ttest(const Dataset& data, const MethodConfig& cfg) {
  return run_hcpi(data, cfg, false);
}

MethodOutcome run_naive(const Dataset& data, const MethodConfig& cfg) {
  validate(cfg);
  const auto est = cross_fitted_diffs(data, cfg.grid.cutoffs, cfg, kTuneFolds);

  MethodOutcome out = reverted(cfg);
  const int g = static_cast<int>(cfg.grid.cutoffs.size());
  out.selection.diagnostics.resize(g);
  // The baseline enters as an implicit candidate with exactly zero gain.
  Argmax best{0.0, cfg.grid.baseline, cfg.grid.baseline};
  for (int j = 0; j < g; ++j) {
    const double sd = std::sqrt(std::max(est.est.sigma_hat(j, j), 0.0));
    out.selection.diagnostics[j] = {cfg.grid.cutoffs[j], est.est.tau_hat(j),
                                    sd, 0.0, 0.0, false};
    best.offer(est.est.tau_hat(j), cfg.grid.cutoffs[j]);
  }
  out.selection.chosen = {best.cutoff};
  out.selection.anchor = best.cutoff;
  out.final_cutoff = best.cutoff;
  out.changed = best.cutoff != cfg.grid.baseline;
  if (out.changed) out.passed_set = {best.cutoff};
  return out;
}

MethodOutcome run_method(const Dataset& data, const MethodConfig& cfg) {
  switch (cfg.method) {
    case Method::CSPI: return run_cspi(data, cfg);
    case Method::CSPI_MT: return run_cspi_mt(data, cfg);
    case Method::HCPI_FINITE: return run_hcpi_finite(data, cfg);
    case Method::HCPI_TTEST: return run_hcpi_ttest(data, cfg);
    case Method::NAIVE: return run_naive(data, cfg);
  }
  throw std::logic_error("run_method: unhandled method");
}

}  // namespace cspi
