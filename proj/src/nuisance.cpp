#include "cspi/nuisance.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cspi {

namespace {

constexpr double kRidge = 1e-8;         // jitter on normal equations
constexpr int kIrlsMaxIter = 100;
constexpr double kIrlsTol = 1e-8;       // max coefficient change

struct FeatureMap {
  Basis basis = Basis::RawCovariates;
  std::vector<double> thresholds;

  int width(int d) const {
    return 1 + d +
           (basis == Basis::RawPlusScoreIndicators
                ? static_cast<int>(thresholds.size())
                : 0);
  }

  Eigen::VectorXd operator()(const Observation& o) const {
    const int d = static_cast<int>(o.covariates.size());
    Eigen::VectorXd x(width(d));
    x(0) = 1.0;
    for (int j = 0; j < d; ++j) x(1 + j) = o.covariates[j];
    if (basis == Basis::RawPlusScoreIndicators) {
      for (size_t t = 0; t < thresholds.size(); ++t) {
        x(1 + d + static_cast<int>(t)) = o.score >= thresholds[t] ? 1.0 : 0.0;
      }
    }
    return x;
  }
};

Eigen::VectorXd solve_least_squares(const Dataset& data,
                                    const std::vector<int>& rows,
                                    const FeatureMap& feat) {
  const int m = feat.width(data.dim());
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(m);
  for (int i : rows) {
    const Eigen::VectorXd x = feat(data[i]);
    xtx.selfadjointView<Eigen::Lower>().rankUpdate(x);
    xty += x * data[i].outcome;
  }
  xtx = xtx.selfadjointView<Eigen::Lower>();
  xtx.diagonal().array() += kRidge;
  return xtx.ldlt().solve(xty);
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// IRLS for a Bernoulli GLM with logit link. Responses must lie in [0, 1].
Eigen::VectorXd solve_logistic(const Dataset& data,
                               const std::vector<int>& rows,
                               const FeatureMap& feat,
                               bool response_is_treatment) {
  const int m = feat.width(data.dim());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  xs.reserve(rows.size());
  ys.reserve(rows.size());
  for (int i : rows) {
    const double y = response_is_treatment
                         ? static_cast<double>(data[i].treatment)
                         : data[i].outcome;
    if (!(y >= 0.0 && y <= 1.0)) {
      throw std::invalid_argument(
          "logistic fit: response outside [0, 1] at data row " +
          std::to_string(i));
    }
    xs.push_back(feat(data[i]));
    ys.push_back(y);
  }
  for (int iter = 0; iter < kIrlsMaxIter; ++iter) {
    Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m);
    for (size_t r = 0; r < xs.size(); ++r) {
      const double p = sigmoid(xs[r].dot(beta));
      const double w = std::max(p * (1.0 - p), 1e-10);
      xtwx.selfadjointView<Eigen::Lower>().rankUpdate(xs[r], w);
      grad += xs[r] * (ys[r] - p);
    }
    xtwx = xtwx.selfadjointView<Eigen::Lower>();
    xtwx.diagonal().array() += kRidge;
    const Eigen::VectorXd step = xtwx.ldlt().solve(grad);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < kIrlsTol) break;
  }
  return beta;
}

std::vector<int> complement_rows(int n, const std::vector<int>& fold) {
  std::vector<char> in_fold(n, 0);
  for (int i : fold) in_fold[i] = 1;
  std::vector<int> rows;
  rows.reserve(n - static_cast<int>(fold.size()));
  for (int i = 0; i < n; ++i) {
    if (!in_fold[i]) rows.push_back(i);
  }
  return rows;
}

void validate_folds(int n, const std::vector<std::vector<int>>& folds) {
  std::vector<char> seen(n, 0);
  int covered = 0;
  for (const auto& f : folds) {
    for (int i : f) {
      if (i < 0 || i >= n || seen[i]) {
        throw std::invalid_argument("fit_cross_fitted: folds must partition the dataset");
      }
      seen[i] = 1;
      ++covered;
    }
  }
  if (covered != n) {
    throw std::invalid_argument("fit_cross_fitted: folds must cover every observation");
  }
}

}  // namespace

FittedNuisance FittedNuisance::from_functions(int k_folds, OutcomeFn mu,
                                              PropensityFn e, double clip) {
  FittedNuisance out;
  out.k_folds = k_folds;
  out.clip = clip;
  out.outcome.assign(k_folds, mu);
  out.propensity.assign(k_folds, e);
  return out;
}

FittedNuisance fit_cross_fitted(const Dataset& data,
                                const std::vector<std::vector<int>>& folds,
                                const NuisanceModelSpec& spec) {
  const int n = data.size();
  const int k = static_cast<int>(folds.size());
  if (n == 0) throw std::invalid_argument("fit_cross_fitted: empty dataset");
  if (k < 2) throw std::invalid_argument("fit_cross_fitted: need at least 2 folds");
  if (!(spec.clip > 0.0 && spec.clip < 0.5)) {
    throw std::invalid_argument("fit_cross_fitted: clip must lie in (0, 0.5)");
  }
  validate_folds(n, folds);

  const FeatureMap feat{spec.basis, spec.indicator_thresholds};

  double whole_sample_mean = 0.0;
  if (spec.propensity_family == PropensityFamily::SampleMean &&
      !spec.propensity_per_fold) {
    for (int i = 0; i < n; ++i) whole_sample_mean += data[i].treatment;
    whole_sample_mean /= n;
  }
  if (spec.propensity_family == PropensityFamily::KnownConstant &&
      !(spec.known_propensity > 0.0 && spec.known_propensity < 1.0)) {
    throw std::invalid_argument(
        "fit_cross_fitted: known propensity must lie in (0, 1)");
  }

  FittedNuisance out;
  out.k_folds = k;
  out.clip = spec.clip;
  out.outcome.resize(k);
  out.propensity.resize(k);

  for (int f = 0; f < k; ++f) {
    const std::vector<int> train = complement_rows(n, folds[f]);

    switch (spec.outcome_family) {
      case OutcomeFamily::ZeroModel:
        out.outcome[f] = [](int, const Observation&) { return 0.0; };
        break;
      case OutcomeFamily::PerArmLeastSquares:
      case OutcomeFamily::PerArmLogistic: {
        std::vector<int> arm0, arm1;
        for (int i : train) {
          (data[i].treatment == 1 ? arm1 : arm0).push_back(i);
        }
        if (arm0.empty() || arm1.empty()) {
          throw std::runtime_error(
              "nuisance fit: training complement of fold " +
              std::to_string(f) + " contains no arm-" +
              std::string(arm0.empty() ? "0" : "1") + " observations");
        }
        if (spec.outcome_family == OutcomeFamily::PerArmLeastSquares) {
          const Eigen::VectorXd b0 = solve_least_squares(data, arm0, feat);
          const Eigen::VectorXd b1 = solve_least_squares(data, arm1, feat);
          out.outcome[f] = [feat, b0, b1](int a, const Observation& o) {
            return feat(o).dot(a == 1 ? b1 : b0);
          };
        } else {
          const Eigen::VectorXd b0 = solve_logistic(data, arm0, feat, false);
          const Eigen::VectorXd b1 = solve_logistic(data, arm1, feat, false);
          out.outcome[f] = [feat, b0, b1](int a, const Observation& o) {
            return sigmoid(feat(o).dot(a == 1 ? b1 : b0));
          };
        }
        break;
      }
    }

    switch (spec.propensity_family) {
      case PropensityFamily::KnownConstant: {
        const double e = spec.known_propensity;
        out.propensity[f] = [e](const Observation&) { return e; };
        break;
      }
      case PropensityFamily::SampleMean: {
        double e = whole_sample_mean;
        if (spec.propensity_per_fold) {
          double sum = 0.0;
          for (int i : train) sum += data[i].treatment;
          e = sum / static_cast<double>(train.size());
        }
        out.propensity[f] = [e](const Observation&) { return e; };
        break;
      }
      case PropensityFamily::Logistic: {
        const Eigen::VectorXd b = solve_logistic(data, train, feat, true);
        out.propensity[f] = [feat, b](const Observation& o) {
          return sigmoid(feat(o).dot(b));
        };
        break;
      }
    }
  }
  return out;
}

double predict(const FittedNuisance& nuisance, int fold, int a,
               const Observation& obs) {
  if (fold < 0 || fold >= nuisance.k_folds) {
    throw std::out_of_range("predict: invalid fold index");
  }
  return nuisance.outcome[fold](a, obs);
}

double predict_propensity(const FittedNuisance& nuisance, int fold,
                          const Observation& obs) {
  if (fold < 0 || fold >= nuisance.k_folds) {
    throw std::out_of_range("predict_propensity: invalid fold index");
  }
  const double e = nuisance.propensity[fold](obs);
  return std::clamp(e, nuisance.clip, 1.0 - nuisance.clip);
}

}  // namespace cspi
