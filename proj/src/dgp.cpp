#include "cspi/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "cspi/rng.hpp"

namespace cspi {

std::string to_string(DgpId id) {
  switch (id) {
    case DgpId::DGP1: return "DGP1";
    case DgpId::DGP2: return "DGP2";
    case DgpId::DGP3: return "DGP3";
  }
  return "DGP?";
}

DgpId dgp_from_string(const std::string& name) {
  if (name == "DGP1" || name == "dgp1") return DgpId::DGP1;
  if (name == "DGP2" || name == "dgp2") return DgpId::DGP2;
  if (name == "DGP3" || name == "dgp3") return DgpId::DGP3;
  throw std::invalid_argument("unknown DGP name: " + name);
}

double score_effect(DgpId dgp, double s) {
  switch (dgp) {
    case DgpId::DGP1: return s;
    case DgpId::DGP2: return 4.0 * (s >= 1.5 ? 1.0 : 0.0) - 2.0 * (s <= -1.5 ? 1.0 : 0.0);
    case DgpId::DGP3: return -0.25;
  }
  return 0.0;
}

double default_baseline(DgpId dgp) {
  return dgp == DgpId::DGP2 ? -2.0 : 2.0;
}

Dataset generate(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("generate: n must be >= 1");
  Rng rng(spec.seed);
  std::vector<Observation> obs;
  obs.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double s = -2.0 + 4.0 * rng.uniform();
    const double x1 = 5.0 * rng.normal();
    const double x2 = 5.0 * rng.normal();
    const int a = rng.uniform() < 0.5 ? 1 : 0;
    const double eps = 5.0 * rng.normal();
    const double mu0 = 2.0 * x1 - 3.0 * x2;
    const double mu1 = score_effect(spec.dgp, s) - 2.0 * x1 - 3.0 * x2;
    Observation o;
    o.covariates = {s, x1, x2};
    o.score = s;
    o.treatment = a;
    o.outcome = (a == 1 ? mu1 : mu0) + eps;
    obs.push_back(std::move(o));
  }
  return Dataset(std::move(obs), 3);
}

namespace {

// Integral of f over [lo, hi] for the piecewise-constant DGP2 effect.
double integral_dgp2(double lo, double hi) {
  const double left = std::max(0.0, std::min(hi, -1.5) - lo);
  const double right = std::max(0.0, hi - std::max(lo, 1.5));
  return -2.0 * left + 4.0 * right;
}

}  // namespace

double true_policy_diff(const TrueValueOracle& oracle, double c) {
  if (!(c >= -2.0 && c <= 2.0)) {
    throw std::invalid_argument("true_policy_diff: cutoff outside [-2, 2]");
  }
  const double c0 = oracle.baseline;
  if (c == c0) return 0.0;
  const double lo = std::min(c, c0);
  const double hi = std::max(c, c0);
  double integral = 0.0;
  switch (oracle.dgp) {
    case DgpId::DGP1: integral = 0.5 * (hi * hi - lo * lo); break;
    case DgpId::DGP2: integral = integral_dgp2(lo, hi); break;
    case DgpId::DGP3: integral = -0.25 * (hi - lo); break;
  }
  const double sign = c < c0 ? 1.0 : -1.0;
  return sign * integral / 4.0;  // score density is 1/4 on [-2, 2]
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

// Whole-file RFC-4180 field scanner (quoted fields may span lines).
std::vector<std::vector<std::string>> scan_csv(const std::string& text,
                                               char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool had_any = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      had_any = true;
    } else if (ch == delim) {
      row.push_back(std::move(field));
      field.clear();
      had_any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (had_any || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        field.clear();
        rows.push_back(std::move(row));
        row.clear();
        had_any = false;
      }
    } else {
      field += ch;
      had_any = true;
    }
  }
  if (had_any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_real(const std::string& s, int row, const std::string& col) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::runtime_error("csv row " + std::to_string(row) +
                             ": cannot parse '" + s + "' in column " + col);
  }
  if (!std::isfinite(v)) {
    throw std::runtime_error("csv row " + std::to_string(row) +
                             ": non-finite value in column " + col);
  }
  return v;
}

int find_column(const std::vector<std::string>& header,
                const std::string& name) {
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  throw std::runtime_error("csv: required column '" + name +
                           "' missing from header");
}

}  // namespace

ExternalTable load_csv(const std::string& path, const CsvSchema& schema) {
  if (schema.score.empty() || schema.treatment.empty() || schema.outcome.empty()) {
    throw std::invalid_argument(
        "load_csv: schema must name score, treatment and outcome columns");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const auto rows = scan_csv(text, schema.delimiter);
  if (rows.empty()) throw std::runtime_error("load_csv: " + path + " has no header row");

  const auto& header = rows[0];
  const int score_col = find_column(header, schema.score);
  const int treat_col = find_column(header, schema.treatment);
  const int outcome_col = find_column(header, schema.outcome);
  const int weight_col =
      schema.weight.empty() ? -1 : find_column(header, schema.weight);
  std::vector<int> cov_cols;
  for (const auto& name : schema.covariates) {
    cov_cols.push_back(find_column(header, name));
  }

  ExternalTable table;
  table.d = static_cast<int>(cov_cols.size());
  for (size_t r = 1; r < rows.size(); ++r) {
    const int rownum = static_cast<int>(r) + 1;  // 1-based, header is row 1
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw std::runtime_error("csv row " + std::to_string(rownum) + ": has " +
                               std::to_string(row.size()) + " fields, header has " +
                               std::to_string(header.size()));
    }
    const double a = parse_real(row[treat_col], rownum, schema.treatment);
    if (a != 0.0 && a != 1.0) {
      throw std::runtime_error("csv row " + std::to_string(rownum) +
                               ": treatment must be 0 or 1");
    }
    table.scores.push_back(parse_real(row[score_col], rownum, schema.score));
    table.treatments.push_back(static_cast<int>(a));
    table.outcomes.push_back(parse_real(row[outcome_col], rownum, schema.outcome));
    if (weight_col >= 0) {
      const double w = parse_real(row[weight_col], rownum, schema.weight);
      if (w < 0.0) {
        throw std::runtime_error("csv row " + std::to_string(rownum) +
                                 ": negative sample weight");
      }
      table.weights.push_back(w);
    }
    std::vector<double> cov;
    cov.reserve(cov_cols.size());
    for (size_t k = 0; k < cov_cols.size(); ++k) {
      cov.push_back(parse_real(row[cov_cols[k]], rownum, schema.covariates[k]));
    }
    table.covariates.push_back(std::move(cov));
  }
  table.n = static_cast<int>(table.scores.size());
  return table;
}

namespace {

Observation table_row(const ExternalTable& table, int i) {
  Observation o;
  o.covariates = table.covariates[i];
  o.score = table.scores[i];
  o.treatment = table.treatments[i];
  o.outcome = table.outcomes[i];
  return o;
}

}  // namespace

Dataset to_dataset(const ExternalTable& table) {
  std::vector<Observation> obs;
  obs.reserve(table.n);
  for (int i = 0; i < table.n; ++i) obs.push_back(table_row(table, i));
  return Dataset(std::move(obs), table.d);
}

Dataset bootstrap_sample(const ExternalTable& table, int m, uint64_t seed) {
  if (table.n == 0) throw std::invalid_argument("bootstrap_sample: empty table");
  if (m < 1) throw std::invalid_argument("bootstrap_sample: m must be >= 1");

  std::vector<double> cumulative(table.n);
  double total = 0.0;
  for (int i = 0; i < table.n; ++i) {
    total += table.weights.empty() ? 1.0 : table.weights[i];
    cumulative[i] = total;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("bootstrap_sample: weights sum to zero");
  }

  Rng rng(seed);
  std::vector<Observation> obs;
  obs.reserve(m);
  for (int r = 0; r < m; ++r) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    int idx = static_cast<int>(it - cumulative.begin());
    if (idx >= table.n) idx = table.n - 1;
    obs.push_back(table_row(table, idx));
  }
  return Dataset(std::move(obs), table.d);
}

}  // namespace cspi
