#include "cspi/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cspi/estimator.hpp"
#include "cspi/parallel.hpp"
#include "cspi/rng.hpp"

namespace cspi {

namespace {

constexpr uint64_t kDataTag = 101;
constexpr uint64_t kSplitTag = 102;
constexpr uint64_t kMethodTag = 103;
constexpr uint64_t kTruthTag = 104;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

std::string field(double v) { return std::isnan(v) ? "" : format_g9(v); }

}  // namespace

std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

uint64_t plan_data_seed(uint64_t base_seed, int gamma_idx, int replication) {
  return derive_seed(base_seed, kDataTag, static_cast<uint64_t>(gamma_idx),
                     static_cast<uint64_t>(replication));
}

uint64_t plan_split_seed(uint64_t base_seed, int gamma_idx, int replication) {
  return derive_seed(base_seed, kSplitTag, static_cast<uint64_t>(gamma_idx),
                     static_cast<uint64_t>(replication));
}

uint64_t plan_method_seed(uint64_t base_seed, Method method, int gamma_idx,
                          int replication) {
  return derive_seed(base_seed, kMethodTag + static_cast<uint64_t>(method),
                     static_cast<uint64_t>(gamma_idx),
                     static_cast<uint64_t>(replication));
}

void resolve_plan_defaults(ExperimentPlan& plan) {
  const bool synthetic = plan.input_csv.empty();
  if (synthetic && plan.dgp.empty()) plan.dgp = "DGP1";
  if (synthetic) {
    const DgpId id = dgp_from_string(plan.dgp);
    if (plan.baseline == 0.0) plan.baseline = default_baseline(id);
    if (plan.nuisance.basis == Basis::RawPlusScoreIndicators &&
        plan.nuisance.indicator_thresholds.empty()) {
      plan.nuisance.indicator_thresholds = {-1.5, 1.5};
    }
  }
  if (plan.grid.empty()) {
    plan.grid.reserve(41);
    for (int j = 0; j < 41; ++j) plan.grid.push_back(-2.0 + 4.0 * j / 40.0);
  }
  if (plan.methods.empty()) plan.methods = {Method::CSPI};
  if (plan.gamma_grid.empty()) plan.gamma_grid = {0.05};
}

namespace {

void validate_plan(const ExperimentPlan& plan) {
  if (plan.replications < 1) {
    throw std::invalid_argument("plan: replications must be >= 1");
  }
  if (plan.methods.empty()) throw std::invalid_argument("plan: no methods");
  if (plan.gamma_grid.empty()) throw std::invalid_argument("plan: no gamma values");
  for (size_t i = 0; i < plan.gamma_grid.size(); ++i) {
    const double g = plan.gamma_grid[i];
    if (!(g > 0.0 && g <= 0.5)) {
      throw std::invalid_argument("plan: gamma values must lie in (0, 0.5]");
    }
    if (i > 0 && !(plan.gamma_grid[i - 1] < g)) {
      throw std::invalid_argument("plan: gamma grid must be strictly increasing");
    }
  }
  if (plan.n < 2) throw std::invalid_argument("plan: n too small");
  if (plan.dgp.empty() && plan.input_csv.empty()) {
    throw std::invalid_argument("plan: either a DGP or an input csv is required");
  }
}

MethodConfig materialize(const ExperimentPlan& plan, Method method,
                         double gamma, uint64_t split_seed,
                         uint64_t method_seed) {
  MethodConfig cfg;
  cfg.method = method;
  cfg.gamma = gamma;
  cfg.split = {plan.zeta, split_seed, plan.k_folds};
  cfg.grid = {plan.grid, plan.baseline};
  cfg.nuisance = plan.nuisance;
  cfg.critical = {plan.n_sim, method_seed};
  cfg.hcpi_range_bound = plan.hcpi_range_bound;
  cfg.hcpi_inflation = plan.hcpi_inflation;
  return cfg;
}

// Ground truth for external tables: policy differences estimated once from
// a table-sized weighted bootstrap, looked up by cutoff.
class TruthSource {
 public:
  TruthSource(const ExperimentPlan& plan, const ExternalTable* table) {
    if (!plan.dgp.empty()) {
      synthetic_ = true;
      oracle_ = {dgp_from_string(plan.dgp), plan.baseline};
      return;
    }
    if (!plan.external_truth || table == nullptr) return;
    const Dataset big = bootstrap_sample(
        *table, table->n, derive_seed(plan.base_seed, kTruthTag));
    const auto folds = k_fold_indices(big.size(), plan.k_folds,
                                      derive_seed(plan.base_seed, kTruthTag, 1));
    const auto nuisance = fit_cross_fitted(big, folds, plan.nuisance);
    const auto res =
        estimate_policy_diffs(big, plan.grid, plan.baseline, nuisance, folds);
    for (size_t j = 0; j < plan.grid.size(); ++j) {
      lookup_[plan.grid[j]] = res.est.tau_hat(static_cast<int>(j));
    }
    available_ = true;
    baseline_ = plan.baseline;
  }

  bool available() const { return synthetic_ || available_; }

  double tau(double cutoff) const {
    if (synthetic_) {
      return cutoff == oracle_.baseline ? 0.0
                                        : true_policy_diff(oracle_, cutoff);
    }
    if (cutoff == baseline_) return 0.0;
    const auto it = lookup_.find(cutoff);
    return it == lookup_.end() ? kNaN : it->second;
  }

  // Whether a strictly worse-than-baseline selection is possible, which is
  // what makes the calibration-error column meaningful.
  bool calibration_meaningful(const std::vector<double>& grid) const {
    if (!available()) return false;
    for (double c : grid) {
      if (tau(c) < 0.0) return true;
    }
    return false;
  }

 private:
  bool synthetic_ = false;
  bool available_ = false;
  TrueValueOracle oracle_;
  double baseline_ = 0.0;
  std::map<double, double> lookup_;
};

}  // namespace

PlanResult run_plan(const ExperimentPlan& plan) {
  validate_plan(plan);

  const bool synthetic = plan.input_csv.empty();
  ExternalTable table;
  if (!synthetic) {
    table = load_csv(plan.input_csv, plan.schema);
    if (table.n < 2) throw std::invalid_argument("plan: input table too small");
  }
  const TruthSource truth(plan, synthetic ? nullptr : &table);
  const DgpId dgp_id = synthetic ? dgp_from_string(plan.dgp) : DgpId::DGP1;

  const int n_methods = static_cast<int>(plan.methods.size());
  const int n_gammas = static_cast<int>(plan.gamma_grid.size());
  const int tasks = n_methods * n_gammas * plan.replications;

  PlanResult result;
  result.records.resize(tasks);

  const int threads = thread_limit();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int t = 0; t < tasks; ++t) {
    const int m_idx = t / (n_gammas * plan.replications);
    const int g_idx = (t / plan.replications) % n_gammas;
    const int rep = t % plan.replications;
    const Method method = plan.methods[m_idx];
    const double gamma = plan.gamma_grid[g_idx];

    ExperimentRecord rec;
    rec.method = method;
    rec.gamma = gamma;
    rec.replication = rep;
    const auto start = std::chrono::steady_clock::now();
    try {
      const uint64_t data_seed = plan_data_seed(plan.base_seed, g_idx, rep);
      const Dataset data =
          synthetic ? generate({dgp_id, plan.n, data_seed})
                    : bootstrap_sample(table, plan.n, data_seed);
      const MethodConfig cfg = materialize(
          plan, method, gamma, plan_split_seed(plan.base_seed, g_idx, rep),
          plan_method_seed(plan.base_seed, method, g_idx, rep));
      const MethodOutcome outcome = run_method(data, cfg);
      rec.chosen = outcome.final_cutoff;
      rec.changed = outcome.changed;
      rec.true_tau = truth.available()
                         ? (outcome.changed ? truth.tau(outcome.final_cutoff) : 0.0)
                         : kNaN;
      rec.error = outcome.changed && rec.true_tau < 0.0;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.failure = e.what();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    result.records[t] = std::move(rec);
  }

  const bool calibration = truth.calibration_meaningful(plan.grid);
  for (int m_idx = 0; m_idx < n_methods; ++m_idx) {
    for (int g_idx = 0; g_idx < n_gammas; ++g_idx) {
      SummaryRow row;
      row.method = plan.methods[m_idx];
      row.gamma = plan.gamma_grid[g_idx];
      int used = 0, excluded = 0, n_changed = 0, n_error = 0;
      double gain_sum = 0.0, gain_sq = 0.0;
      for (int rep = 0; rep < plan.replications; ++rep) {
        const int t = (m_idx * n_gammas + g_idx) * plan.replications + rep;
        const ExperimentRecord& rec = result.records[t];
        if (rec.failed) {
          ++excluded;
          continue;
        }
        ++used;
        n_changed += rec.changed ? 1 : 0;
        n_error += rec.error ? 1 : 0;
        const double gain = rec.changed ? rec.true_tau : 0.0;
        gain_sum += gain;
        gain_sq += gain * gain;
      }
      row.replications_used = used;
      row.excluded = excluded;
      if (used > 0) {
        const double p = static_cast<double>(n_changed) / used;
        const double e = static_cast<double>(n_error) / used;
        row.pass_rate = p;
        row.pass_rate_se = std::sqrt(p * (1.0 - p) / used);
        if (truth.available()) {
          row.error_rate = e;
          row.error_rate_se = std::sqrt(e * (1.0 - e) / used);
          row.expected_improvement = gain_sum / used;
          const double var =
              std::max(0.0, gain_sq / used - row.expected_improvement *
                                                 row.expected_improvement);
          row.expected_improvement_se = std::sqrt(var / used);
          row.calibration_reported = calibration;
          row.calibration_error =
              calibration ? std::fabs(e - row.gamma) : kNaN;
        } else {
          row.error_rate = kNaN;
          row.error_rate_se = kNaN;
          row.expected_improvement = kNaN;
          row.expected_improvement_se = kNaN;
          row.calibration_error = kNaN;
        }
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

namespace {

nlohmann::ordered_json nuisance_to_json(const NuisanceModelSpec& spec) {
  const char* outcome = spec.outcome_family == OutcomeFamily::ZeroModel
                            ? "zero-model"
                            : (spec.outcome_family == OutcomeFamily::PerArmLogistic
                                   ? "per-arm-logistic"
                                   : "per-arm-least-squares");
  const char* propensity =
      spec.propensity_family == PropensityFamily::KnownConstant
          ? "known-constant"
          : (spec.propensity_family == PropensityFamily::Logistic
                 ? "logistic"
                 : "sample-mean");
  return {
      {"outcome_family", outcome},
      {"propensity_family", propensity},
      {"basis", spec.basis == Basis::RawPlusScoreIndicators
                    ? "raw-plus-score-indicators"
                    : "raw-covariates"},
      {"known_propensity", spec.known_propensity},
      {"indicator_thresholds", spec.indicator_thresholds},
      {"clip", spec.clip},
      {"propensity_per_fold", spec.propensity_per_fold},
  };
}

NuisanceModelSpec nuisance_from_json(const nlohmann::json& j) {
  NuisanceModelSpec spec;
  const std::string outcome = j.at("outcome_family");
  if (outcome == "zero-model") spec.outcome_family = OutcomeFamily::ZeroModel;
  else if (outcome == "per-arm-logistic") spec.outcome_family = OutcomeFamily::PerArmLogistic;
  else if (outcome == "per-arm-least-squares") spec.outcome_family = OutcomeFamily::PerArmLeastSquares;
  else throw std::invalid_argument("manifest: unknown outcome family " + outcome);
  const std::string propensity = j.at("propensity_family");
  if (propensity == "known-constant") spec.propensity_family = PropensityFamily::KnownConstant;
  else if (propensity == "logistic") spec.propensity_family = PropensityFamily::Logistic;
  else if (propensity == "sample-mean") spec.propensity_family = PropensityFamily::SampleMean;
  else throw std::invalid_argument("manifest: unknown propensity family " + propensity);
  const std::string basis = j.at("basis");
  if (basis == "raw-plus-score-indicators") spec.basis = Basis::RawPlusScoreIndicators;
  else if (basis == "raw-covariates") spec.basis = Basis::RawCovariates;
  else throw std::invalid_argument("manifest: unknown basis " + basis);
  spec.known_propensity = j.at("known_propensity");
  spec.indicator_thresholds = j.at("indicator_thresholds").get<std::vector<double>>();
  spec.clip = j.at("clip");
  spec.propensity_per_fold = j.at("propensity_per_fold");
  return spec;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void emit_outputs(const ExperimentPlan& plan, const PlanResult& result,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "plotdata", ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
  }

  std::string summary =
      "method,gamma,replications,excluded,pass_rate,pass_rate_se,error_rate,"
      "error_rate_se,expected_improvement,expected_improvement_se,"
      "calibration_error\n";
  for (const SummaryRow& r : result.rows) {
    summary += csv_escape(to_string(r.method)) + "," + format_g9(r.gamma) + "," +
               std::to_string(r.replications_used) + "," +
               std::to_string(r.excluded) + "," + field(r.pass_rate) + "," +
               field(r.pass_rate_se) + "," + field(r.error_rate) + "," +
               field(r.error_rate_se) + "," + field(r.expected_improvement) +
               "," + field(r.expected_improvement_se) + "," +
               (r.calibration_reported ? field(r.calibration_error) : "") +
               "\n";
  }
  write_text(fs::path(dir) / "summary.csv", summary);

  std::string records =
      "method,gamma,replication,chosen_cutoff,changed,true_tau,error,failed,"
      "failure,wall_seconds\n";
  for (const ExperimentRecord& r : result.records) {
    records += csv_escape(to_string(r.method)) + "," + format_g9(r.gamma) +
               "," + std::to_string(r.replication) + "," + field(r.chosen) +
               "," + (r.changed ? "1" : "0") + "," + field(r.true_tau) + "," +
               (r.error ? "1" : "0") + "," + (r.failed ? "1" : "0") + "," +
               csv_escape(r.failure) + "," + format_g9(r.wall_seconds) + "\n";
  }
  write_text(fs::path(dir) / "records.csv", records);

  const struct {
    const char* name;
    double SummaryRow::*value;
    double SummaryRow::*se;
  } series[] = {
      {"pass_rate", &SummaryRow::pass_rate, &SummaryRow::pass_rate_se},
      {"error_rate", &SummaryRow::error_rate, &SummaryRow::error_rate_se},
      {"expected_improvement", &SummaryRow::expected_improvement,
       &SummaryRow::expected_improvement_se},
  };
  for (const auto& s : series) {
    std::string text = "gamma,method,value,stderr\n";
    for (size_t g = 0; g < plan.gamma_grid.size(); ++g) {
      for (const SummaryRow& r : result.rows) {
        if (r.gamma != plan.gamma_grid[g]) continue;
        if (std::isnan(r.*(s.value))) continue;
        text += format_g9(r.gamma) + "," + csv_escape(to_string(r.method)) +
                "," + field(r.*(s.value)) + "," + field(r.*(s.se)) + "\n";
      }
    }
    write_text(fs::path(dir) / "plotdata" / (std::string(s.name) + ".csv"), text);
  }

  write_manifest(plan, (fs::path(dir) / "manifest.json").string());
}

void write_manifest(const ExperimentPlan& plan, const std::string& path) {
  nlohmann::ordered_json j;
  j["dgp"] = plan.dgp;
  j["input_csv"] = plan.input_csv;
  j["schema"] = {{"score", plan.schema.score},
                 {"treatment", plan.schema.treatment},
                 {"outcome", plan.schema.outcome},
                 {"weight", plan.schema.weight},
                 {"covariates", plan.schema.covariates},
                 {"delimiter", std::string(1, plan.schema.delimiter)}};
  j["external_truth"] = plan.external_truth;
  j["n"] = plan.n;
  j["baseline"] = plan.baseline;
  j["grid"] = plan.grid;
  std::vector<std::string> methods;
  for (Method m : plan.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["gammas"] = plan.gamma_grid;
  j["replications"] = plan.replications;
  j["base_seed"] = plan.base_seed;
  j["zeta"] = plan.zeta;
  j["k_folds"] = plan.k_folds;
  j["n_sim"] = plan.n_sim;
  j["nuisance"] = nuisance_to_json(plan.nuisance);
  j["hcpi_range_bound"] = plan.hcpi_range_bound;
  j["hcpi_inflation"] = plan.hcpi_inflation;
  write_text(path, j.dump(2) + "\n");
}

ExperimentPlan plan_from_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  nlohmann::json j;
  in >> j;

  ExperimentPlan plan;
  plan.dgp = j.at("dgp");
  plan.input_csv = j.at("input_csv");
  const auto& s = j.at("schema");
  plan.schema.score = s.at("score");
  plan.schema.treatment = s.at("treatment");
  plan.schema.outcome = s.at("outcome");
  plan.schema.weight = s.at("weight");
  plan.schema.covariates = s.at("covariates").get<std::vector<std::string>>();
  const std::string delim = s.at("delimiter");
  plan.schema.delimiter = delim.empty() ? ',' : delim[0];
  plan.external_truth = j.at("external_truth");
  plan.n = j.at("n");
  plan.baseline = j.at("baseline");
  plan.grid = j.at("grid").get<std::vector<double>>();
  for (const std::string& name : j.at("methods")) {
    plan.methods.push_back(method_from_string(name));
  }
  plan.gamma_grid = j.at("gammas").get<std::vector<double>>();
  plan.replications = j.at("replications");
  plan.base_seed = j.at("base_seed");
  plan.zeta = j.at("zeta");
  plan.k_folds = j.at("k_folds");
  plan.n_sim = j.at("n_sim");
  plan.nuisance = nuisance_from_json(j.at("nuisance"));
  plan.hcpi_range_bound = j.at("hcpi_range_bound");
  plan.hcpi_inflation = j.at("hcpi_inflation");
  return plan;
}

}  // namespace cspi
