// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/regression/cv_search.hpp"
#include "lcpred/regression/regressor.hpp"
#include "lcpred/stopping.hpp"

namespace lcpred {

/// Featurizes every record of `ds` at observation length tau. Curve values and
/// targets are converted to the normalized orientation.
inline RegressionData featurize(const CurveDataset& ds, int tau, const FeatureSchema& schema) {
  RegressionData out;
  const auto n = static_cast<Eigen::Index>(ds.size());
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = ds.records[static_cast<std::size_t>(i)];
    const auto scores = ds.orientation.normalize(rec.curve.prefix(tau));
    FeatureVector fv = assemble_feature_vector(scores, ds.horizon, rec.config, schema, ds.keys);
    if (i == 0) {
      out.layout = fv.layout;
      out.x.resize(n, static_cast<Eigen::Index>(fv.entries.size()));
    }
    for (std::size_t j = 0; j < fv.entries.size(); ++j) out.x(i, static_cast<Eigen::Index>(j)) = fv.entries[j];
    out.y[i] = ds.final_score(static_cast<std::size_t>(i));
  }
  return out;
}

/// Leave-one-out RMS residual. `fit` maps training data to a callable
/// `double(std::span<const double>)` predictor; this keeps the estimator
/// usable with stub backends.
template <class Fit>
  requires std::invocable<Fit&, const RegressionData&>
double estimate_sigma_loocv(const RegressionData& data, Fit&& fit, double sigma_floor = kDefaultSigmaFloor) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw PreconditionError("LOOCV needs at least two rows");
  double ss = 0.0;
  std::vector<Eigen::Index> keep;
  std::vector<double> row(static_cast<std::size_t>(data.x.cols()));
  for (Eigen::Index i = 0; i < n; ++i) {
    keep.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) keep.push_back(j);
    auto predictor = fit(data.select(keep));
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) row[static_cast<std::size_t>(j)] = data.x(i, j);
    const double r = predictor(std::span<const double>(row)) - data.y[i];
    if (!std::isfinite(r)) throw FitError("LOOCV produced a non-finite residual at row " + std::to_string(i));
    ss += r * r;
  }
  return std::max(std::sqrt(ss / static_cast<double>(n)), sigma_floor);
}

/// LOOCV with a fixed regressor spec (the CV winner); no inner re-search.
inline double estimate_sigma_loocv(const RegressionData& data, const RegressorSpec& spec,
                                   std::uint64_t seed, double sigma_floor = kDefaultSigmaFloor) {
  return estimate_sigma_loocv(
      data,
      [&](const RegressionData& train) {
        return [m = fit_regressor(train, spec, seed)](std::span<const double> x) { return m.predict(x); };
      },
      sigma_floor);
}

struct FinalPrediction {
  double value = 0.0;  // raw orientation unless stated otherwise
  double sigma = 0.0;
  int tau = 0;
};

/// One regressor per observation length tau plus the LOOCV sigma table.
struct SequentialRegressionModel {
  std::map<int, TrainedRegressor> models;
  std::map<int, double> sigma;
  FeatureSchema schema;
  int horizon = 0;
  MetricOrientation orientation;
  FeatureKeys keys;
  double sigma_floor = kDefaultSigmaFloor;

  std::vector<int> taus() const {
    std::vector<int> out;
    for (const auto& [t, _] : models) out.push_back(t);
    return out;
  }

  bool has(int tau) const { return models.contains(tau); }

  /// Prediction from normalized observations; result stays normalized.
  FinalPrediction predict_normalized(const ConfigDescriptor& config,
                                     std::span<const double> observed_scores) const {
    const int tau = static_cast<int>(observed_scores.size());
    auto it = models.find(tau);
    if (it == models.end()) {
      std::string avail;
      for (int t : taus()) avail += (avail.empty() ? "" : ",") + std::to_string(t);
      throw PreconditionError("no model fitted for tau=" + std::to_string(tau) + " (available: " +
                              avail + ")");
    }
    const FeatureVector fv = assemble_feature_vector(observed_scores, horizon, config, schema, keys);
    return {it->second.predict(fv.entries), sigma.at(tau), tau};
  }

  /// Final-value prediction from raw observations, reported in raw orientation.
  FinalPrediction predict_final(const ConfigDescriptor& config, std::span<const double> observed_raw) const {
    FinalPrediction p = predict_normalized(config, orientation.normalize(observed_raw));
    p.value = orientation.denormalize(p.value);
    return p;
  }
};

struct SrmFitOptions {
  std::optional<std::vector<int>> taus;  // default: 1..T-1
  double sigma_floor = kDefaultSigmaFloor;
};

/// Per tau: featurize, random-search CV, refit the winner on all rows, LOOCV
/// sigma with the winner's hyperparameters.
inline SequentialRegressionModel fit_srm(const CurveDataset& train, Backend backend, const CVConfig& cv,
                                         const FeatureSchema& schema, const SrmFitOptions& opts = {}) {
  if (train.horizon < 2) throw PreconditionError("SRM needs horizon >= 2");
  if (static_cast<int>(train.size()) < cv.folds)
    throw PreconditionError("SRM needs at least " + std::to_string(cv.folds) + " training curves");
  if (!schema.valid()) throw PreconditionError("feature schema selects no block");
  if (!(opts.sigma_floor > 0.0)) throw PreconditionError("sigma floor must be positive");

  std::vector<int> taus;
  if (opts.taus) {
    taus = *opts.taus;
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  } else {
    for (int t = 1; t < train.horizon; ++t) taus.push_back(t);
  }

  SequentialRegressionModel srm;
  srm.schema = schema;
  srm.horizon = train.horizon;
  srm.orientation = train.orientation;
  srm.keys = train.keys;
  srm.sigma_floor = opts.sigma_floor;
  for (int tau : taus) {
    if (tau < 1 || tau >= train.horizon)
      throw PreconditionError("tau " + std::to_string(tau) + " outside [1, " + std::to_string(train.horizon - 1) + "]");
    try {
      const RegressionData data = featurize(train, tau, schema);
      CVConfig tau_cv = cv;
      tau_cv.seed = derive_seed(cv.seed, {static_cast<std::uint64_t>(tau)});
      const CVResult best = random_search_cv(data, tau_cv, backend);
      const std::uint64_t fit_seed = derive_seed(tau_cv.seed, {0x66697431ULL});
      srm.models.emplace(tau, fit_regressor(data, best.spec, fit_seed));
      srm.sigma.emplace(tau, estimate_sigma_loocv(data, best.spec, fit_seed, opts.sigma_floor));
    } catch (const Error& e) {
      throw FitError("SRM fit failed at tau=" + std::to_string(tau) + ": " + e.what());
    }
  }
  return srm;
}

}  // namespace lcpred
