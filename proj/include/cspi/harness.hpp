#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cspi/dgp.hpp"
#include "cspi/pipeline.hpp"

namespace cspi {

// A replicated gamma-sweep over methods, on a synthetic generator or on
// bootstrap resamples of an external table.
struct ExperimentPlan {
  std::string dgp;            // "DGP1".."DGP3"; empty when input_csv is set
  std::string input_csv;      // external mode
  CsvSchema schema;           // external mode
  bool external_truth = true; // score external runs against a full-size
                              // bootstrap estimate of the policy differences
  int n = 2000;               // per-replication sample (or bootstrap) size
  double baseline = 0.0;
  std::vector<double> grid;
  std::vector<Method> methods;
  std::vector<double> gamma_grid;  // strictly increasing, in (0, 0.5]
  int replications = 500;
  uint64_t base_seed = 0;
  std::string out_dir;
  double zeta = 0.2;
  int k_folds = 5;
  int n_sim = 10000;
  NuisanceModelSpec nuisance;
  double hcpi_range_bound = 66.0;
  double hcpi_inflation = 2.0;
};

struct ExperimentRecord {
  Method method = Method::CSPI;
  double gamma = 0.0;
  int replication = 0;
  double chosen = 0.0;
  bool changed = false;
  double true_tau = 0.0;  // NaN when no ground truth exists
  bool error = false;     // changed and true_tau < 0
  bool failed = false;
  std::string failure;
  double wall_seconds = 0.0;
};

struct SummaryRow {
  Method method = Method::CSPI;
  double gamma = 0.0;
  int replications_used = 0;
  int excluded = 0;
  double pass_rate = 0.0;
  double pass_rate_se = 0.0;
  double error_rate = 0.0;           // NaN when no ground truth exists
  double error_rate_se = 0.0;
  double expected_improvement = 0.0; // reversions count as zero gain
  double expected_improvement_se = 0.0;
  double calibration_error = 0.0;    // |error_rate - gamma|
  bool calibration_reported = false; // only where a worse-than-baseline
                                     // selection is possible
};

struct PlanResult {
  std::vector<SummaryRow> rows;
  std::vector<ExperimentRecord> records;
};

// Per-task seed derivation, shared with tests: the generated dataset and the
// tune/test split depend only on (gamma index, replication), so every method
// sees identical data within a replication. Method-internal randomness keys
// on the method identity, making per-method results invariant to the order
// methods are listed in a plan.
uint64_t plan_data_seed(uint64_t base_seed, int gamma_idx, int replication);
uint64_t plan_split_seed(uint64_t base_seed, int gamma_idx, int replication);
uint64_t plan_method_seed(uint64_t base_seed, Method method, int gamma_idx,
                          int replication);

// Fill per-DGP defaults (baseline, grid, outcome basis) for fields left at
// their zero values. Called by the CLI before the manifest is written, so
// manifests always capture the fully resolved plan.
void resolve_plan_defaults(ExperimentPlan& plan);

// Run every (method, gamma, replication) task. Replications execute in
// parallel with per-task derived seeds; aggregation order is fixed, so the
// output is independent of the worker count.
PlanResult run_plan(const ExperimentPlan& plan);

// Write summary.csv, records.csv, plotdata/{pass_rate,error_rate,
// expected_improvement}.csv and manifest.json under dir.
void emit_outputs(const ExperimentPlan& plan, const PlanResult& result,
                  const std::string& dir);

ExperimentPlan plan_from_manifest(const std::string& path);
void write_manifest(const ExperimentPlan& plan, const std::string& path);

// "%.9g" rendering used for all CSV floating-point output.
std::string format_g9(double v);

}  // namespace cspi
