#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace cspi {

// One unit's record. `score` is the threshold variable S = g(X),
// materialized by the caller or the data generator.
struct Observation {
  std::vector<double> covariates;
  double score = 0.0;
  int treatment = 0;  // 0 or 1
  double outcome = 0.0;
};

// Immutable after construction. Validates finiteness, treatment coding and
// covariate dimension up front so downstream code never sees bad rows.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Observation> observations, int dim);

  int size() const { return static_cast<int>(obs_.size()); }
  int dim() const { return d_; }
  const Observation& operator[](int i) const { return obs_[i]; }
  const std::vector<Observation>& observations() const { return obs_; }

  Dataset subset(const std::vector<int>& indices) const;

 private:
  std::vector<Observation> obs_;
  int d_ = 0;
};

// Candidate cutoff set plus the status-quo cutoff. The baseline may sit
// outside [front, back]; boundary cutoffs encode treat-all / treat-none.
struct CutoffGrid {
  std::vector<double> cutoffs;  // strictly increasing, finite
  double baseline = 0.0;

  void validate() const;
};

struct SplitSpec {
  double zeta = 0.2;  // fraction routed to the tuning set
  uint64_t seed = 0;
  int k_folds = 5;
};

// Uniform split without replacement; the first set gets floor(zeta * n)
// observations. Deterministic given (data order, seed).
std::pair<Dataset, Dataset> split_tune_test(const Dataset& data,
                                            const SplitSpec& spec);

// k disjoint index sets covering [0, n), sizes differing by at most one.
std::vector<std::vector<int>> k_fold_indices(int n, int k, uint64_t seed);

}  // namespace cspi
