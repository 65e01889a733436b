#pragma once

#include <functional>
#include <vector>

#include "cspi/core.hpp"

namespace cspi {

enum class OutcomeFamily { PerArmLeastSquares, PerArmLogistic, ZeroModel };
enum class PropensityFamily { KnownConstant, SampleMean, Logistic };
enum class Basis { RawCovariates, RawPlusScoreIndicators };

struct NuisanceModelSpec {
  OutcomeFamily outcome_family = OutcomeFamily::PerArmLeastSquares;
  PropensityFamily propensity_family = PropensityFamily::SampleMean;
  Basis basis = Basis::RawCovariates;
  double known_propensity = 0.5;              // KnownConstant only, in (0,1)
  std::vector<double> indicator_thresholds;   // RawPlusScoreIndicators only
  double clip = 0.01;                         // propensity clip, in (0, 0.5)
  bool propensity_per_fold = false;           // SampleMean: complement mean
                                              // instead of whole-sample mean
};

// Cross-fitted predictors: entry k was trained without fold k. Predictors
// are plain functions so tests can plug in exact oracles.
struct FittedNuisance {
  using OutcomeFn = std::function<double(int a, const Observation&)>;
  using PropensityFn = std::function<double(const Observation&)>;

  int k_folds = 0;
  double clip = 0.01;
  std::vector<OutcomeFn> outcome;       // one per fold
  std::vector<PropensityFn> propensity; // one per fold, pre-clip

  static FittedNuisance from_functions(int k_folds, OutcomeFn mu,
                                       PropensityFn e, double clip = 0.01);
};

FittedNuisance fit_cross_fitted(const Dataset& data,
                                const std::vector<std::vector<int>>& folds,
                                const NuisanceModelSpec& spec);

double predict(const FittedNuisance& nuisance, int fold, int a,
               const Observation& obs);

// Clipped to [clip, 1 - clip].
double predict_propensity(const FittedNuisance& nuisance, int fold,
                          const Observation& obs);

}  // namespace cspi
