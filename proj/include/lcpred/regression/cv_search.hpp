// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/common.hpp"
#include "lcpred/regression/kernel.hpp"
#include "lcpred/regression/metrics.hpp"
#include "lcpred/regression/nu_svr.hpp"
#include "lcpred/regression/regressor.hpp"
#include "lcpred/regression/scaler.hpp"

namespace lcpred {

/// Sampling distributions for the random hyperparameter search.
struct SearchSpace {
  double c_min = 1e-5, c_max = 10.0;          // log-uniform
  double nu_min = 0.0, nu_max = 1.0;          // uniform, 0 excluded
  double gamma_min = 1e-5, gamma_max = 10.0;  // log-uniform
  int trees_min = 10, trees_max = 800;        // uniform integer
  double ratio_min = 0.1, ratio_max = 0.5;    // uniform
};

struct CVConfig {
  int folds = 3;
  int search_budget = 1000;
  std::uint64_t seed = 0;
  SearchSpace space;
  int threads = 1;

  void validate() const {
    if (folds < 2) throw PreconditionError("cross-validation needs at least 2 folds");
    if (search_budget < 1) throw PreconditionError("search budget must be at least 1");
    if (threads < 1) throw PreconditionError("thread count must be at least 1");
  }
};

struct CVResult {
  RegressorSpec spec;
  double score = kNegInf;  // mean fold R^2 of the chosen spec
  int candidate = 0;       // sample index of the chosen spec
  int failures = 0;
};

namespace detail {

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace detail

/// Draws one spec for `backend` from the search space.
inline RegressorSpec sample_spec(Backend backend, const SearchSpace& s, std::mt19937_64& rng) {
  RegressorSpec spec{backend, {}};
  auto draw_nu = [&] {
    std::uniform_real_distribution<double> u(s.nu_min, s.nu_max);
    double v = 0.0;
    while (!(v > 0.0)) v = u(rng);
    return std::min(v, 1.0);
  };
  switch (backend) {
    case Backend::nu_svr_rbf:
      spec.hyperparams["C"] = detail::log_uniform(rng, s.c_min, s.c_max);
      spec.hyperparams["nu"] = draw_nu();
      spec.hyperparams["gamma"] = detail::log_uniform(rng, s.gamma_min, s.gamma_max);
      break;
    case Backend::nu_svr_linear:
      spec.hyperparams["C"] = detail::log_uniform(rng, s.c_min, s.c_max);
      spec.hyperparams["nu"] = draw_nu();
      break;
    case Backend::kernel_ols:
      spec.hyperparams["gamma"] = detail::log_uniform(rng, s.gamma_min, s.gamma_max);
      break;
    case Backend::random_forest: {
      std::uniform_int_distribution<int> trees(s.trees_min, s.trees_max);
      std::uniform_real_distribution<double> ratio(s.ratio_min, s.ratio_max);
      spec.hyperparams["trees"] = trees(rng);
      spec.hyperparams["feature_ratio"] = ratio(rng);
      break;
    }
    case Backend::last_seen_value: break;
  }
  return spec;
}

/// Deterministic k-fold assignment: a seeded shuffle cut into contiguous
/// blocks. Returns the validation indices of each fold.
inline std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, int folds,
                                                         std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto rng = make_rng(seed, {0x666f6c64ULL});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const auto lo = static_cast<std::size_t>(n * f / folds);
    const auto hi = static_cast<std::size_t>(n * (f + 1) / folds);
    out[static_cast<std::size_t>(f)].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                            order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(out[static_cast<std::size_t>(f)].begin(), out[static_cast<std::size_t>(f)].end());
  }
  return out;
}

namespace detail {

// Everything about a fold that does not depend on the candidate. For SVR
// candidates the kernel matrices are rebuilt from cached inner products and
// squared distances instead of refitting the scaler and recomputing features.
struct FoldCache {
  RegressionData train;
  RegressionData valid;
  Eigen::MatrixXd inner_tt, inner_vt, sqd_tt, sqd_vt;
};

inline std::vector<FoldCache> build_fold_caches(const RegressionData& data, int folds,
                                                std::uint64_t seed, bool svr) {
  std::vector<FoldCache> caches;
  const auto assignment = make_folds(data.rows(), folds, seed);
  for (const auto& val : assignment) {
    std::vector<Eigen::Index> tr;
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      if (k < val.size() && val[k] == i) { ++k; continue; }
      tr.push_back(i);
    }
    FoldCache c;
    c.train = data.select(tr);
    c.valid = data.select(val);
    if (svr) {
      const Scaler s = fit_scaler(c.train.x);
      const Eigen::MatrixXd zt = s.transform(c.train.x);
      const Eigen::MatrixXd zv = s.transform(c.valid.x);
      c.inner_tt = zt * zt.transpose();
      c.inner_vt = zv * zt.transpose();
      c.sqd_tt = squared_distances(zt, zt);
      c.sqd_vt = squared_distances(zv, zt);
    }
    caches.push_back(std::move(c));
  }
  return caches;
}

inline double score_candidate(const std::vector<FoldCache>& folds, const RegressorSpec& spec,
                              std::uint64_t seed) {
  double total = 0.0;
  const bool svr = spec.backend == Backend::nu_svr_linear || spec.backend == Backend::nu_svr_rbf;
  for (const auto& f : folds) {
    std::vector<double> pred(static_cast<std::size_t>(f.valid.rows()));
    if (svr) {
      const Kernel k = spec.backend == Backend::nu_svr_linear ? Kernel::linear()
                                                              : Kernel::rbf(spec.at("gamma"));
      const NuSvrDual dual = solve_nu_svr_dual(kernel_from_cache(k, f.inner_tt, f.sqd_tt),
                                               f.train.y, spec.at("C"), spec.at("nu"));
      const Eigen::VectorXd p =
          kernel_from_cache(k, f.inner_vt, f.sqd_vt) * dual.coef + Eigen::VectorXd::Constant(f.valid.rows(), dual.bias);
      for (Eigen::Index i = 0; i < p.size(); ++i) pred[static_cast<std::size_t>(i)] = p[i];
    } else {
      const TrainedRegressor m = fit_regressor(f.train, spec, seed);
      for (Eigen::Index i = 0; i < f.valid.rows(); ++i)
        pred[static_cast<std::size_t>(i)] = m.predict_row(f.valid.x, i);
    }
    std::vector<double> truth(f.valid.y.data(), f.valid.y.data() + f.valid.y.size());
    const double r2 = r_squared(pred, truth);
    if (!std::isfinite(r2)) throw FitError("non-finite fold score");
    total += r2;
  }
  return total / static_cast<double>(folds.size());
}

}  // namespace detail

/// Random hyperparameter search scored by mean k-fold R^2. Candidates are
/// drawn up front from one stream, so the winner does not depend on the
/// thread count. Ties go to the earliest sample.
inline CVResult random_search_cv(const RegressionData& data, const CVConfig& cv, Backend backend) {
  cv.validate();
  if (data.rows() < cv.folds)
    throw PreconditionError("need at least " + std::to_string(cv.folds) + " rows for " +
                            std::to_string(cv.folds) + "-fold CV, got " + std::to_string(data.rows()));

  const bool svr = backend == Backend::nu_svr_linear || backend == Backend::nu_svr_rbf;
  const int budget = backend == Backend::last_seen_value ? 1 : cv.search_budget;
  auto rng = make_rng(cv.seed, {0x73706563ULL});
  std::vector<RegressorSpec> specs;
  specs.reserve(static_cast<std::size_t>(budget));
  for (int i = 0; i < budget; ++i) specs.push_back(sample_spec(backend, cv.space, rng));

  const auto folds = detail::build_fold_caches(data, cv.folds, cv.seed, svr);
  std::vector<std::optional<double>> scores(static_cast<std::size_t>(budget));
  std::vector<std::string> errors(static_cast<std::size_t>(budget));

  auto work = [&](int first, int stride) {
    for (int i = first; i < budget; i += stride) {
      try {
        scores[static_cast<std::size_t>(i)] = detail::score_candidate(
            folds, specs[static_cast<std::size_t>(i)],
            derive_seed(cv.seed, {static_cast<std::uint64_t>(i)}));
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(i)] = e.what();
      }
    }
  };
  const int threads = std::min(cv.threads, budget);
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  CVResult best;
  for (int i = 0; i < budget; ++i) {
    const auto& s = scores[static_cast<std::size_t>(i)];
    if (!s) { ++best.failures; continue; }
    if (*s > best.score) {
      best.score = *s;
      best.spec = specs[static_cast<std::size_t>(i)];
      best.candidate = i;
    }
  }
  if (best.failures == budget) {
    std::string msg = "all " + std::to_string(budget) + " candidates failed to fit";
    for (int i = 0; i < std::min(budget, 3); ++i) msg += "; #" + std::to_string(i) + ": " + errors[static_cast<std::size_t>(i)];
    throw FitError(msg);
  }
  return best;
}

}  // namespace lcpred
