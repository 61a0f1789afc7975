// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/common.hpp"
#include "lcpred/regression/kernel.hpp"
#include "lcpred/regression/kernel_ols.hpp"
#include "lcpred/regression/nu_svr.hpp"
#include "lcpred/regression/random_forest.hpp"
#include "lcpred/regression/scaler.hpp"

namespace lcpred {

enum class Backend { nu_svr_linear, nu_svr_rbf, kernel_ols, random_forest, last_seen_value };

inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::nu_svr_linear: return "nu_svr_linear";
    case Backend::nu_svr_rbf: return "nu_svr_rbf";
    case Backend::kernel_ols: return "kernel_ols";
    case Backend::random_forest: return "random_forest";
    case Backend::last_seen_value: return "last_seen_value";
  }
  return "unknown";
}

inline Backend parse_backend(const std::string& s) {
  for (Backend b : {Backend::nu_svr_linear, Backend::nu_svr_rbf, Backend::kernel_ols,
                    Backend::random_forest, Backend::last_seen_value})
    if (to_string(b) == s) return b;
  throw ValidationError("unknown backend '" + s + "'");
}

/// Backend plus its hyperparameters. Required keys per backend:
///   nu_svr_linear: C, nu           nu_svr_rbf: C, nu, gamma
///   kernel_ols:    gamma (+ optional ridge)
///   random_forest: trees, feature_ratio
///   last_seen_value: none
struct RegressorSpec {
  Backend backend = Backend::nu_svr_rbf;
  std::map<std::string, double> hyperparams;

  double at(const std::string& key) const {
    auto it = hyperparams.find(key);
    if (it == hyperparams.end())
      throw PreconditionError(to_string(backend) + " spec lacks hyperparameter '" + key + "'");
    return it->second;
  }

  void validate() const {
    std::set<std::string> need, allowed;
    switch (backend) {
      case Backend::nu_svr_linear: need = {"C", "nu"}; break;
      case Backend::nu_svr_rbf: need = {"C", "nu", "gamma"}; break;
      case Backend::kernel_ols: need = {"gamma"}; allowed = {"ridge"}; break;
      case Backend::random_forest: need = {"trees", "feature_ratio"}; break;
      case Backend::last_seen_value: break;
    }
    for (const auto& k : need)
      if (!hyperparams.contains(k))
        throw ValidationError(to_string(backend) + " spec is missing '" + k + "'");
    for (const auto& [k, v] : hyperparams) {
      if (!need.contains(k) && !allowed.contains(k))
        throw ValidationError(to_string(backend) + " spec has unexpected '" + k + "'");
      if (!std::isfinite(v)) throw ValidationError("hyperparameter '" + k + "' is not finite");
    }
    if (hyperparams.contains("C") && !(at("C") > 0.0)) throw ValidationError("C must be positive");
    if (hyperparams.contains("nu") && !(at("nu") > 0.0 && at("nu") <= 1.0))
      throw ValidationError("nu must lie in (0, 1]");
    if (hyperparams.contains("gamma") && !(at("gamma") > 0.0))
      throw ValidationError("gamma must be positive");
    if (hyperparams.contains("trees") && !(at("trees") >= 1.0))
      throw ValidationError("trees must be at least 1");
    if (hyperparams.contains("feature_ratio") &&
        !(at("feature_ratio") > 0.0 && at("feature_ratio") <= 1.0))
      throw ValidationError("feature_ratio must lie in (0, 1]");
  }

  bool operator==(const RegressorSpec&) const = default;
};

/// Feature rows (raw, unstandardized), targets, and the slot layout.
struct RegressionData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> layout;

  Eigen::Index rows() const { return x.rows(); }

  RegressionData select(std::span<const Eigen::Index> idx) const {
    RegressionData out;
    out.layout = layout;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.x.row(static_cast<Eigen::Index>(k)) = x.row(idx[k]);
      out.y[static_cast<Eigen::Index>(k)] = y[idx[k]];
    }
    return out;
  }
};

/// Reads the y_tau slot directly from the raw feature vector.
struct LastSeenModel {
  Eigen::Index slot = 0;
};

/// Index of the last observed value in a layout whose TS block comes first.
inline Eigen::Index last_seen_slot(const std::vector<std::string>& layout) {
  Eigen::Index slot = -1;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i] != "y" + std::to_string(i + 1)) break;
    slot = static_cast<Eigen::Index>(i);
  }
  if (slot < 0) throw FitError("last_seen_value needs the time-series feature block");
  return slot;
}

struct TrainedRegressor {
  RegressorSpec spec;
  Scaler scaler;
  std::variant<NuSvrModel, KernelOlsModel, RandomForestModel, LastSeenModel> model;

  double predict(std::span<const double> raw) const {
    if (const auto* ls = std::get_if<LastSeenModel>(&model)) {
      if (ls->slot >= static_cast<Eigen::Index>(raw.size()))
        throw PreconditionError("feature vector too short for last-seen slot");
      return raw[static_cast<std::size_t>(ls->slot)];
    }
    const Eigen::VectorXd z = scaler.transform(raw);
    return std::visit(
        [&](const auto& m) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LastSeenModel>) return 0.0;
          else return m.predict(z);
        },
        model);
  }

  double predict_row(const Eigen::MatrixXd& x, Eigen::Index i) const {
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    return predict(row);
  }
};

/// Standardizes the rows and fits the backend named by `spec`. The seed only
/// matters for random forests.
inline TrainedRegressor fit_regressor(const RegressionData& data, const RegressorSpec& spec,
                                      std::uint64_t seed = 0) {
  spec.validate();
  if (data.rows() == 0) throw PreconditionError("cannot fit on zero rows");
  if (!data.x.allFinite() || !data.y.allFinite()) throw FitError("non-finite training data");
  TrainedRegressor out;
  out.spec = spec;
  out.scaler = fit_scaler(data.x);
  if (spec.backend == Backend::last_seen_value) {
    out.model = LastSeenModel{last_seen_slot(data.layout)};
    return out;
  }
  const Eigen::MatrixXd z = out.scaler.transform(data.x);
  switch (spec.backend) {
    case Backend::nu_svr_linear:
      out.model = fit_nu_svr(z, data.y, spec.at("C"), spec.at("nu"), Kernel::linear());
      break;
    case Backend::nu_svr_rbf:
      out.model = fit_nu_svr(z, data.y, spec.at("C"), spec.at("nu"), Kernel::rbf(spec.at("gamma")));
      break;
    case Backend::kernel_ols: {
      const double ridge = spec.hyperparams.contains("ridge") ? spec.at("ridge") : kDefaultOlsRidge;
      out.model = fit_kernel_ols(z, data.y, Kernel::rbf(spec.at("gamma")), ridge);
      break;
    }
    case Backend::random_forest: {
      ForestParams p;
      p.trees = static_cast<int>(spec.at("trees"));
      p.feature_ratio = spec.at("feature_ratio");
      out.model = fit_random_forest(z, data.y, p, seed);
      break;
    }
    case Backend::last_seen_value: break;
  }
  return out;
}

}  // namespace lcpred
