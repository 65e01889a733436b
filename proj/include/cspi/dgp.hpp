#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cspi/core.hpp"

namespace cspi {

enum class DgpId { DGP1, DGP2, DGP3 };

std::string to_string(DgpId id);
DgpId dgp_from_string(const std::string& name);

struct SyntheticSpec {
  DgpId dgp = DgpId::DGP1;
  int n = 2000;
  uint64_t seed = 0;
};

struct TrueValueOracle {
  DgpId dgp = DgpId::DGP1;
  double baseline = 2.0;
};

// Score-driven treatment effect component f_i(s).
double score_effect(DgpId dgp, double s);

// Status-quo cutoff used in the built-in experiments: treat-none (2) for
// DGP1/DGP3, treat-all (-2) for DGP2.
double default_baseline(DgpId dgp);

// Draw n units: S ~ Unif[-2,2], X1, X2 ~ N(0,25), A ~ Bernoulli(1/2),
// Y = A*mu1 + (1-A)*mu0 with mu0 = 2X1 - 3X2, mu1 = f(S) - 2X1 - 3X2 and a
// shared unit-level noise term eps ~ N(0,25). Covariates are (S, X1, X2).
Dataset generate(const SyntheticSpec& spec);

// Closed-form policy difference tau(c) = V(pi(c)) - V(pi(baseline)).
// Requires c in [-2, 2].
double true_policy_diff(const TrueValueOracle& oracle, double c);

// ---------------------------------------------------------------------------
// External tables

struct CsvSchema {
  std::string score;
  std::string treatment;
  std::string outcome;
  std::string weight;                   // optional; empty means absent
  std::vector<std::string> covariates;  // may be empty
  char delimiter = ',';
};

struct ExternalTable {
  std::vector<double> scores;
  std::vector<int> treatments;
  std::vector<double> outcomes;
  std::vector<double> weights;               // empty unless schema.weight set
  std::vector<std::vector<double>> covariates;  // row-major
  int n = 0;
  int d = 0;
};

// Parse a UTF-8 CSV with a header row; fields may be RFC-4180 quoted and
// reals may use scientific notation. Malformed rows are rejected with their
// row number; negative weights are a schema error.
ExternalTable load_csv(const std::string& path, const CsvSchema& schema);

// Rows as-is, in file order.
Dataset to_dataset(const ExternalTable& table);

// m i.i.d. draws with replacement, probability proportional to the sample
// weights (uniform when absent). Deterministic given seed.
Dataset bootstrap_sample(const ExternalTable& table, int m, uint64_t seed);

}  // namespace cspi
