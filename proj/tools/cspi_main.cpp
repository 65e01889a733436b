// Command-line front end: `simulate` runs replicated gamma sweeps,
// `analyze` applies one method to a CSV, `benchmark` reproduces the full
// multi-method experiment series, and `oracle` prints closed-form policy
// difference tables for the built-in generators.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cspi/dgp.hpp"
#include "cspi/harness.hpp"
#include "cspi/pipeline.hpp"

using namespace cspi;

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Accepts "lo:hi:count" for a uniform grid or a comma-separated list.
std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  const auto colon_parts = split_on(text, ':');
  if (colon_parts.size() == 3) {
    const double lo = std::stod(colon_parts[0]);
    const double hi = std::stod(colon_parts[1]);
    const int count = std::stoi(colon_parts[2]);
    if (count < 1) throw CLI::ValidationError("grid count must be >= 1");
    for (int j = 0; j < count; ++j) {
      out.push_back(count == 1 ? lo : lo + (hi - lo) * j / (count - 1));
    }
    return out;
  }
  for (const std::string& part : split_on(text, ',')) {
    if (!part.empty()) out.push_back(std::stod(part));
  }
  if (out.empty()) throw CLI::ValidationError("empty value list: " + text);
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  for (const std::string& part : split_on(text, ',')) {
    if (!part.empty()) out.push_back(method_from_string(part));
  }
  if (out.empty()) throw CLI::ValidationError("no methods given");
  return out;
}

// "score=s,treatment=a,outcome=y[,weight=w][,covariates=a;b;c][,delimiter=;]"
CsvSchema parse_schema(const std::string& text) {
  CsvSchema schema;
  for (const std::string& part : split_on(text, ',')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("schema entries must look like key=value: " + part);
    }
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    if (key == "score") schema.score = value;
    else if (key == "treatment") schema.treatment = value;
    else if (key == "outcome") schema.outcome = value;
    else if (key == "weight") schema.weight = value;
    else if (key == "covariates") {
      for (const std::string& name : split_on(value, ';')) {
        if (!name.empty()) schema.covariates.push_back(name);
      }
    } else if (key == "delimiter") {
      if (value.size() != 1) throw CLI::ValidationError("delimiter must be one character");
      schema.delimiter = value[0];
    } else {
      throw CLI::ValidationError("unknown schema key: " + key);
    }
  }
  if (schema.score.empty() || schema.treatment.empty() || schema.outcome.empty()) {
    throw CLI::ValidationError("schema needs score=, treatment= and outcome=");
  }
  return schema;
}

void apply_outcome_model(NuisanceModelSpec& spec, const std::string& name) {
  if (name == "least-squares") spec.outcome_family = OutcomeFamily::PerArmLeastSquares;
  else if (name == "logistic") spec.outcome_family = OutcomeFamily::PerArmLogistic;
  else if (name == "zero") spec.outcome_family = OutcomeFamily::ZeroModel;
  else throw CLI::ValidationError("unknown outcome model: " + name);
}

void apply_propensity_model(NuisanceModelSpec& spec, const std::string& name) {
  if (name == "sample-mean") spec.propensity_family = PropensityFamily::SampleMean;
  else if (name == "logistic") spec.propensity_family = PropensityFamily::Logistic;
  else if (name == "known") spec.propensity_family = PropensityFamily::KnownConstant;
  else throw CLI::ValidationError("unknown propensity model: " + name);
}

void apply_basis(NuisanceModelSpec& spec, const std::string& name) {
  if (name == "raw") spec.basis = Basis::RawCovariates;
  else if (name == "score-indicators") spec.basis = Basis::RawPlusScoreIndicators;
  else throw CLI::ValidationError("unknown basis: " + name);
}

// Flat key=value config document; '#' starts a comment line.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("config line " + std::to_string(lineno) +
                                 " is not key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct SimulateArgs {
  std::string dgp, input, schema, grid, gammas, methods, config, manifest;
  std::string out, basis, outcome_model, propensity;
  int n = 2000, reps = 500, folds = 5, nsim = 10000;
  double baseline = 0.0, zeta = 0.2, clip = 0.01, known_propensity = 0.5;
  double hcpi_range_bound = 66.0, hcpi_inflation = 2.0;
  uint64_t seed = 0;
  bool no_external_truth = false;
};

ExperimentPlan build_plan(const SimulateArgs& a, const CLI::App* cmd) {
  if (!a.manifest.empty()) return plan_from_manifest(a.manifest);

  SimulateArgs r = a;  // resolved: config first, explicit flags override
  if (!a.config.empty()) {
    const auto kv = read_config(a.config);
    auto get = [&](const char* key, const std::string& flag, auto& slot) {
      const auto it = kv.find(key);
      if (it == kv.end() || cmd->count(flag) > 0) return;
      using T = std::decay_t<decltype(slot)>;
      if constexpr (std::is_same_v<T, std::string>) slot = it->second;
      else if constexpr (std::is_same_v<T, int>) slot = std::stoi(it->second);
      else if constexpr (std::is_same_v<T, uint64_t>) slot = std::stoull(it->second);
      else slot = std::stod(it->second);
    };
    get("dgp", "--dgp", r.dgp);
    get("input", "--input", r.input);
    get("schema", "--schema", r.schema);
    get("grid", "--grid", r.grid);
    get("gammas", "--gammas", r.gammas);
    get("methods", "--methods", r.methods);
    get("out", "--out", r.out);
    get("basis", "--basis", r.basis);
    get("outcome_model", "--outcome-model", r.outcome_model);
    get("propensity", "--propensity", r.propensity);
    get("n", "--n", r.n);
    get("reps", "--reps", r.reps);
    get("folds", "--folds", r.folds);
    get("nsim", "--nsim", r.nsim);
    get("baseline", "--baseline", r.baseline);
    get("zeta", "--zeta", r.zeta);
    get("clip", "--clip", r.clip);
    get("known_propensity", "--known-propensity", r.known_propensity);
    get("hcpi_range_bound", "--hcpi-range-bound", r.hcpi_range_bound);
    get("hcpi_inflation", "--hcpi-inflation", r.hcpi_inflation);
    get("seed", "--seed", r.seed);
  }

  ExperimentPlan plan;
  plan.dgp = r.dgp;
  plan.input_csv = r.input;
  if (!r.input.empty()) plan.schema = parse_schema(r.schema);
  plan.external_truth = !r.no_external_truth;
  plan.n = r.n;
  plan.baseline = r.baseline;
  if (!r.grid.empty()) plan.grid = parse_values(r.grid);
  if (!r.methods.empty()) plan.methods = parse_methods(r.methods);
  if (!r.gammas.empty()) plan.gamma_grid = parse_values(r.gammas);
  plan.replications = r.reps;
  plan.base_seed = r.seed;
  plan.out_dir = r.out;
  plan.zeta = r.zeta;
  plan.k_folds = r.folds;
  plan.n_sim = r.nsim;
  if (!r.outcome_model.empty()) apply_outcome_model(plan.nuisance, r.outcome_model);
  if (!r.propensity.empty()) apply_propensity_model(plan.nuisance, r.propensity);
  if (!r.basis.empty()) apply_basis(plan.nuisance, r.basis);
  plan.nuisance.clip = r.clip;
  plan.nuisance.known_propensity = r.known_propensity;
  plan.hcpi_range_bound = r.hcpi_range_bound;
  plan.hcpi_inflation = r.hcpi_inflation;
  if (plan.dgp == "DGP2" && r.basis.empty()) {
    plan.nuisance.basis = Basis::RawPlusScoreIndicators;
  }
  resolve_plan_defaults(plan);
  return plan;
}

int run_simulate(const SimulateArgs& args, const CLI::App* cmd) {
  ExperimentPlan plan = build_plan(args, cmd);
  if (!args.out.empty()) plan.out_dir = args.out;
  if (plan.out_dir.empty()) {
    std::cerr << "simulate: --out is required\n";
    return 2;
  }
  const PlanResult result = run_plan(plan);
  emit_outputs(plan, result, plan.out_dir);
  int excluded = 0;
  for (const auto& row : result.rows) excluded += row.excluded;
  std::printf("wrote %s (%zu summary rows, %zu records, %d excluded)\n",
              plan.out_dir.c_str(), result.rows.size(), result.records.size(),
              excluded);
  for (const SummaryRow& row : result.rows) {
    std::printf("  %-12s gamma=%-10s pass_rate=%-12s", to_string(row.method).c_str(),
                format_g9(row.gamma).c_str(), format_g9(row.pass_rate).c_str());
    if (!std::isnan(row.error_rate)) {
      std::printf(" error_rate=%-12s", format_g9(row.error_rate).c_str());
    }
    if (!std::isnan(row.expected_improvement)) {
      std::printf(" expected_improvement=%s",
                  format_g9(row.expected_improvement).c_str());
    }
    std::printf("\n");
  }
  return 0;
}

int run_analyze(const std::string& input, const std::string& schema_text,
                double baseline, const std::string& grid_text, double gamma,
                const std::string& method_name, uint64_t seed, double zeta,
                int folds, int nsim, const std::string& outcome_model,
                const std::string& propensity, double clip,
                double hcpi_range_bound, double hcpi_inflation) {
  const CsvSchema schema = parse_schema(schema_text);
  const Dataset data = to_dataset(load_csv(input, schema));

  MethodConfig cfg;
  cfg.method = method_from_string(method_name);
  cfg.gamma = gamma;
  cfg.split = {zeta, derive_seed(seed, 1), folds};
  cfg.grid = {parse_values(grid_text), baseline};
  cfg.critical = {nsim, derive_seed(seed, 2)};
  if (!outcome_model.empty()) apply_outcome_model(cfg.nuisance, outcome_model);
  if (!propensity.empty()) apply_propensity_model(cfg.nuisance, propensity);
  cfg.nuisance.clip = clip;
  cfg.hcpi_range_bound = hcpi_range_bound;
  cfg.hcpi_inflation = hcpi_inflation;

  const MethodOutcome out = run_method(data, cfg);
  std::printf("method:        %s\n", to_string(cfg.method).c_str());
  std::printf("rows:          %d\n", data.size());
  std::printf("baseline:      %s\n", format_g9(baseline).c_str());
  std::printf("tested cutoffs:");
  for (double c : out.selection.chosen) std::printf(" %s", format_g9(c).c_str());
  std::printf("\n");
  for (size_t j = 0; j < out.decision.cutoffs.size(); ++j) {
    std::printf("  cutoff %-12s lower_bound %-14s %s\n",
                format_g9(out.decision.cutoffs[j]).c_str(),
                format_g9(out.decision.lower_bounds(j)).c_str(),
                out.decision.passed[j] ? "PASS" : "fail");
  }
  std::printf("final cutoff:  %s\n", format_g9(out.final_cutoff).c_str());
  std::printf("changed:       %s\n", out.changed ? "yes" : "no");
  return 0;
}

int run_benchmark(const std::string& out, int reps, int n, uint64_t seed,
                  int nsim) {
  const std::vector<Method> main_methods = {
      Method::CSPI, Method::CSPI_MT, Method::HCPI_TTEST, Method::HCPI_FINITE};
  struct Entry {
    const char* dgp;
    int gamma_count;
    bool with_naive;
  };
  const Entry entries[] = {{"DGP1", 10, false}, {"DGP2", 10, false},
                           {"DGP3", 20, true}};
  for (const Entry& e : entries) {
    ExperimentPlan plan;
    plan.dgp = e.dgp;
    plan.n = n;
    plan.methods = main_methods;
    if (e.with_naive) plan.methods.push_back(Method::NAIVE);
    for (int j = 0; j < e.gamma_count; ++j) {
      plan.gamma_grid.push_back(0.01 + (0.2 - 0.01) * j / (e.gamma_count - 1));
    }
    plan.replications = reps;
    plan.base_seed = seed;
    plan.n_sim = nsim;
    if (plan.dgp == "DGP2") plan.nuisance.basis = Basis::RawPlusScoreIndicators;
    resolve_plan_defaults(plan);
    const std::string dir =
        (std::filesystem::path(out) / plan.dgp).string();
    plan.out_dir = dir;
    std::printf("running %s sweep (%d gammas x %d reps x %zu methods)...\n",
                e.dgp, e.gamma_count, reps, plan.methods.size());
    std::fflush(stdout);
    emit_outputs(plan, run_plan(plan), dir);
    std::printf("  -> %s\n", dir.c_str());
  }
  return 0;
}

int run_oracle(const std::string& dgp_name, const std::string& grid_text,
               double baseline, bool baseline_set) {
  const DgpId dgp = dgp_from_string(dgp_name);
  const TrueValueOracle oracle{dgp, baseline_set ? baseline
                                                 : default_baseline(dgp)};
  std::printf("cutoff,true_tau\n");
  for (double c : parse_values(grid_text)) {
    std::printf("%s,%s\n", format_g9(c).c_str(),
                format_g9(true_policy_diff(oracle, c)).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe threshold-policy improvement toolkit"};
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a replicated gamma sweep and write result tables");
  simulate->add_option("--dgp", sim.dgp, "Synthetic generator: DGP1|DGP2|DGP3");
  simulate->add_option("--input", sim.input, "External CSV instead of a generator");
  simulate->add_option("--schema", sim.schema, "CSV column mapping");
  simulate->add_option("--n", sim.n, "Per-replication sample size");
  simulate->add_option("--baseline", sim.baseline, "Baseline cutoff");
  simulate->add_option("--grid", sim.grid, "Cutoff grid (lo:hi:count or list)");
  simulate->add_option("--gammas", sim.gammas, "Gamma grid (lo:hi:count or list)");
  simulate->add_option("--methods", sim.methods, "Comma-separated method list");
  simulate->add_option("--reps", sim.reps, "Replications per gamma");
  simulate->add_option("--seed", sim.seed, "Base seed");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--zeta", sim.zeta, "Tuning-split fraction");
  simulate->add_option("--folds", sim.folds, "Cross-fitting folds");
  simulate->add_option("--nsim", sim.nsim, "Critical-value simulation draws");
  simulate->add_option("--basis", sim.basis, "raw | score-indicators");
  simulate->add_option("--outcome-model", sim.outcome_model,
                       "least-squares | logistic | zero");
  simulate->add_option("--propensity", sim.propensity,
                       "sample-mean | logistic | known");
  simulate->add_option("--known-propensity", sim.known_propensity,
                       "Propensity value for --propensity known");
  simulate->add_option("--clip", sim.clip, "Propensity clip");
  simulate->add_option("--hcpi-range-bound", sim.hcpi_range_bound,
                       "Hoeffding range bound");
  simulate->add_option("--hcpi-inflation", sim.hcpi_inflation,
                       "HCPI selection width multiplier");
  simulate->add_option("--config", sim.config, "Flat key=value config file");
  simulate->add_option("--from-manifest", sim.manifest,
                       "Replay a plan from manifest.json");
  simulate->add_flag("--no-external-truth", sim.no_external_truth,
                     "Skip the bootstrap truth table for external inputs");

  // analyze
  std::string an_input, an_schema, an_grid, an_method = "CSPI";
  std::string an_outcome_model, an_propensity;
  double an_baseline = 0.0, an_gamma = 0.05, an_zeta = 0.2, an_clip = 0.01;
  double an_range = 66.0, an_inflation = 2.0;
  uint64_t an_seed = 0;
  int an_folds = 5, an_nsim = 10000;
  CLI::App* analyze =
      app.add_subcommand("analyze", "Run one method once on a CSV file");
  analyze->add_option("--input", an_input, "CSV path")->required();
  analyze->add_option("--schema", an_schema, "CSV column mapping")->required();
  analyze->add_option("--baseline-cutoff", an_baseline, "Status-quo cutoff")
      ->required();
  analyze->add_option("--grid", an_grid, "Cutoff grid")->required();
  analyze->add_option("--gamma", an_gamma, "Error tolerance");
  analyze->add_option("--method", an_method, "Method name");
  analyze->add_option("--seed", an_seed, "Seed");
  analyze->add_option("--zeta", an_zeta, "Tuning-split fraction");
  analyze->add_option("--folds", an_folds, "Cross-fitting folds");
  analyze->add_option("--nsim", an_nsim, "Critical-value draws");
  analyze->add_option("--outcome-model", an_outcome_model,
                      "least-squares | logistic | zero");
  analyze->add_option("--propensity", an_propensity,
                      "sample-mean | logistic | known");
  analyze->add_option("--clip", an_clip, "Propensity clip");
  analyze->add_option("--hcpi-range-bound", an_range, "Hoeffding range bound");
  analyze->add_option("--hcpi-inflation", an_inflation,
                      "HCPI selection width multiplier");

  // benchmark
  std::string bm_out;
  int bm_reps = 500, bm_n = 2000, bm_nsim = 10000;
  uint64_t bm_seed = 0;
  CLI::App* benchmark = app.add_subcommand(
      "benchmark", "Full multi-method sweep over all three generators");
  benchmark->add_option("--out", bm_out, "Output directory")->required();
  benchmark->add_option("--reps", bm_reps, "Replications per gamma");
  benchmark->add_option("--n", bm_n, "Per-replication sample size");
  benchmark->add_option("--seed", bm_seed, "Base seed");
  benchmark->add_option("--nsim", bm_nsim, "Critical-value draws");

  // oracle
  std::string or_dgp, or_grid = "-2:2:41";
  double or_baseline = 0.0;
  CLI::App* oracle =
      app.add_subcommand("oracle", "Print closed-form policy difference tables");
  oracle->add_option("--dgp", or_dgp, "DGP1|DGP2|DGP3")->required();
  oracle->add_option("--grid", or_grid, "Cutoff grid");
  CLI::Option* or_baseline_opt =
      oracle->add_option("--baseline", or_baseline, "Baseline cutoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim, simulate);
    if (analyze->parsed()) {
      return run_analyze(an_input, an_schema, an_baseline, an_grid, an_gamma,
                         an_method, an_seed, an_zeta, an_folds, an_nsim,
                         an_outcome_model, an_propensity, an_clip, an_range,
                         an_inflation);
    }
    if (benchmark->parsed()) {
      return run_benchmark(bm_out, bm_reps, bm_n, bm_seed, bm_nsim);
    }
    if (oracle->parsed()) {
      return run_oracle(or_dgp, or_grid, or_baseline,
                        or_baseline_opt->count() > 0);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
