#pragma once

#include <string>
#include <vector>

#include "cspi/core.hpp"
#include "cspi/inference.hpp"
#include "cspi/nuisance.hpp"
#include "cspi/selection.hpp"

namespace cspi {

enum class Method { CSPI, CSPI_MT, HCPI_FINITE, HCPI_TTEST, NAIVE };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct MethodConfig {
  Method method = Method::CSPI;
  double gamma = 0.05;          // in (0, 0.5]
  SplitSpec split;
  CutoffGrid grid;
  NuisanceModelSpec nuisance;
  CriticalValueSpec critical;
  double hcpi_range_bound = 66.0;  // sigma bound for the Hoeffding test
  double hcpi_inflation = 2.0;     // width multiplier for HCPI selection
};

struct MethodOutcome {
  double final_cutoff = 0.0;       // baseline when nothing passes
  std::vector<double> passed_set;
  bool changed = false;
  SelectionResult selection;       // tuning-split trace
  SafetyDecision decision;         // test-split trace (empty for NAIVE)
};

MethodOutcome run_cspi(const Dataset& data, const MethodConfig& cfg);
MethodOutcome run_cspi_mt(const Dataset& data, const MethodConfig& cfg);
MethodOutcome run_hcpi_finite(const Dataset& data, const MethodConfig& cfg);
MethodOutcome run_hcpi_ttest(const Dataset& data, const MethodConfig& cfg);
MethodOutcome run_naive(const Dataset& data, const MethodConfig& cfg);

// Dispatch on cfg.method.
MethodOutcome run_method(const Dataset& data, const MethodConfig& cfg);

}  // namespace cspi
