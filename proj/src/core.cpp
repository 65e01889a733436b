#include "cspi/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cspi/rng.hpp"

namespace cspi {

Dataset::Dataset(std::vector<Observation> observations, int dim)
    : obs_(std::move(observations)), d_(dim) {
  if (d_ < 0) throw std::invalid_argument("Dataset: negative dimension");
  for (size_t i = 0; i < obs_.size(); ++i) {
    const Observation& o = obs_[i];
    if (static_cast<int>(o.covariates.size()) != d_) {
      throw std::invalid_argument("Dataset: row " + std::to_string(i) +
                                  " has covariate length " +
                                  std::to_string(o.covariates.size()) +
                                  ", expected " + std::to_string(d_));
    }
    if (o.treatment != 0 && o.treatment != 1) {
      throw std::invalid_argument("Dataset: row " + std::to_string(i) +
                                  " has treatment outside {0,1}");
    }
    if (!std::isfinite(o.score) || !std::isfinite(o.outcome)) {
      throw std::invalid_argument("Dataset: row " + std::to_string(i) +
                                  " has non-finite score or outcome");
    }
    for (double v : o.covariates) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("Dataset: row " + std::to_string(i) +
                                    " has non-finite covariate");
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  std::vector<Observation> out;
  out.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= size()) {
      throw std::out_of_range("Dataset::subset: index out of range");
    }
    out.push_back(obs_[i]);
  }
  Dataset d;
  d.obs_ = std::move(out);
  d.d_ = d_;
  return d;
}

void CutoffGrid::validate() const {
  if (cutoffs.empty()) throw std::invalid_argument("CutoffGrid: empty cutoff set");
  if (!std::isfinite(baseline)) {
    throw std::invalid_argument("CutoffGrid: non-finite baseline");
  }
  for (size_t j = 0; j < cutoffs.size(); ++j) {
    if (!std::isfinite(cutoffs[j])) {
      throw std::invalid_argument("CutoffGrid: non-finite cutoff");
    }
    if (j > 0 && !(cutoffs[j - 1] < cutoffs[j])) {
      throw std::invalid_argument("CutoffGrid: cutoffs must be strictly increasing");
    }
  }
}

namespace {

std::vector<int> shuffled_indices(int n, uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

}  // namespace

std::pair<Dataset, Dataset> split_tune_test(const Dataset& data,
                                            const SplitSpec& spec) {
  const int n = data.size();
  if (n == 0) throw std::invalid_argument("split_tune_test: empty dataset");
  if (!(spec.zeta > 0.0 && spec.zeta < 1.0)) {
    throw std::invalid_argument("split_tune_test: zeta must lie in (0, 1)");
  }
  // Small nudge so that exact products like 0.3 * 10 floor to the intended
  // integer despite binary representation of zeta.
  const int n_tune = static_cast<int>(std::floor(spec.zeta * n + 1e-9));
  if (n_tune < 1 || n - n_tune < 1) {
    throw std::invalid_argument(
        "split_tune_test: degenerate split (n=" + std::to_string(n) +
        ", zeta=" + std::to_string(spec.zeta) + " leaves one side empty)");
  }
  std::vector<int> idx = shuffled_indices(n, spec.seed);
  std::vector<int> tune(idx.begin(), idx.begin() + n_tune);
  std::vector<int> test(idx.begin() + n_tune, idx.end());
  std::sort(tune.begin(), tune.end());
  std::sort(test.begin(), test.end());
  return {data.subset(tune), data.subset(test)};
}

std::vector<std::vector<int>> k_fold_indices(int n, int k, uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k_fold_indices: k must be >= 2");
  if (k > n) {
    throw std::invalid_argument("k_fold_indices: k=" + std::to_string(k) +
                                " exceeds n=" + std::to_string(n));
  }
  std::vector<int> idx = shuffled_indices(n, seed);
  std::vector<std::vector<int>> folds(k);
  const int base = n / k;
  const int extra = n % k;
  int pos = 0;
  for (int f = 0; f < k; ++f) {
    const int len = base + (f < extra ? 1 : 0);
    folds[f].assign(idx.begin() + pos, idx.begin() + pos + len);
    std::sort(folds[f].begin(), folds[f].end());
    pos += len;
  }
  return folds;
}

}  // namespace cspi
