// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/regression/metrics.hpp"
#include "lcpred/srm.hpp"
#include "lcpred/stopping.hpp"

namespace lcpred {

struct SimulationConfig {
  int orderings = 10;
  int burn_in = 100;
  TerminationPolicy policy;
  Backend backend = Backend::nu_svr_rbf;
  CVConfig cv;
  FeatureSchema schema;
  std::optional<std::vector<int>> taus;  // checkpoints with a model; default 1..T-1
  std::uint64_t seed = 0;
};

struct OrderingResult {
  std::vector<std::size_t> order;
  long epochs_used = 0;
  long epochs_saved = 0;
  bool recovered_optimal = false;
  int terminations = 0;
  int terminated_good = 0;  // terminated although the true final beat the reference
  std::vector<double> cumulative_best;  // best true final among fully trained configs
  std::string error;  // non-empty when the SRM fit failed
};

struct SimulationResult {
  std::vector<OrderingResult> orderings;
  long full_epochs = 0;  // N * T
  double speedup = 1.0;  // N * T / mean epochs used
  double recovery_rate = 0.0;
  int recovered = 0;
};

namespace detail {

inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int ordering) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, {0x6f7264ULL, static_cast<std::uint64_t>(ordering)});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline OrderingResult replay_ordering(const CurveDataset& ds, const std::vector<std::size_t>& order, int burn_in,
                                      const SequentialRegressionModel& srm, const TerminationPolicy& policy,
                                      double true_max) {
  const int T = ds.horizon;
  OrderingResult out;
  out.order = order;
  std::vector<double> best;
  double true_best = kNegInf;
  bool optimum_finished = false;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t idx = order[pos];
    const auto& rec = ds.records[idx];
    const double y_true = ds.final_score(idx);
    int used = T;
    double reported = y_true;
    if (static_cast<int>(pos) >= burn_in) {
      const auto scores = ds.orientation.normalize(rec.curve.values);
      for (int tau = 1; tau < T; ++tau) {
        if (!srm.has(tau)) continue;
        const FinalPrediction p =
            srm.predict_normalized(rec.config, std::span<const double>(scores.data(), static_cast<std::size_t>(tau)));
        const Decision d = should_terminate(policy, p.value, p.sigma, best);
        if (d.action == Action::terminate) {
          used = tau;
          reported = p.value;
          ++out.terminations;
          if (y_true >= d.reference) ++out.terminated_good;
          break;
        }
      }
    }
    out.epochs_used += used;
    out.epochs_saved += T - used;
    update_best(best, reported);
    if (used == T) {
      true_best = std::max(true_best, y_true);
      if (y_true == true_max) optimum_finished = true;
    }
    out.cumulative_best.push_back(true_best);
  }
  out.recovered_optimal = optimum_finished;
  return out;
}

inline void summarize(SimulationResult& res, const CurveDataset& ds) {
  res.full_epochs = static_cast<long>(ds.size()) * ds.horizon;
  double used = 0.0;
  int ok = 0;
  for (const auto& o : res.orderings) {
    if (!o.error.empty()) continue;
    used += static_cast<double>(o.epochs_used);
    ++ok;
    if (o.recovered_optimal) ++res.recovered;
  }
  if (ok > 0) {
    res.speedup = static_cast<double>(res.full_epochs) / (used / ok);
    res.recovery_rate = static_cast<double>(res.recovered) / ok;
  }
}

}  // namespace detail

/// Sequential search replay under several policies. Per ordering, the SRM is
/// fitted once on the burn-in configs and shared by every policy, so results
/// for different policies are directly comparable.
inline std::vector<SimulationResult> simulate_sequential_search(const CurveDataset& ds, const SimulationConfig& sim,
                                                                const std::vector<TerminationPolicy>& policies) {
  validate_dataset(ds);
  if (sim.orderings < 1) throw PreconditionError("simulation needs at least one ordering");
  if (sim.burn_in < sim.cv.folds || sim.burn_in >= static_cast<int>(ds.size()))
    throw PreconditionError("burn-in must be at least the fold count and below the dataset size");
  for (const auto& p : policies) p.validate();

  double true_max = kNegInf;
  for (std::size_t i = 0; i < ds.size(); ++i) true_max = std::max(true_max, ds.final_score(i));

  std::vector<SimulationResult> results(policies.size());
  for (int o = 0; o < sim.orderings; ++o) {
    const auto order = detail::shuffled_order(ds.size(), sim.seed, o);
    std::optional<SequentialRegressionModel> srm;
    std::string error;
    try {
      const std::vector<std::size_t> head(order.begin(), order.begin() + sim.burn_in);
      CVConfig cv = sim.cv;
      cv.seed = derive_seed(sim.seed, {0x73726dULL, static_cast<std::uint64_t>(o)});
      SrmFitOptions opts;
      opts.taus = sim.taus;
      opts.sigma_floor = sim.policy.sigma_floor;
      srm = fit_srm(ds.subset(head), sim.backend, cv, sim.schema, opts);
    } catch (const Error& e) {
      error = e.what();
    }
    for (std::size_t p = 0; p < policies.size(); ++p) {
      if (srm) {
        results[p].orderings.push_back(detail::replay_ordering(ds, order, sim.burn_in, *srm, policies[p], true_max));
      } else {
        OrderingResult failed;
        failed.order = order;
        failed.error = error;
        results[p].orderings.push_back(std::move(failed));
      }
    }
  }
  for (auto& r : results) detail::summarize(r, ds);
  return results;
}

inline SimulationResult simulate_sequential_search(const CurveDataset& ds, const SimulationConfig& sim) {
  return simulate_sequential_search(ds, sim, {sim.policy}).front();
}

// ---------------------------------------------------------------------------
// Prediction-quality evaluation.

/// Maps (training set, tau, seed) to a final-score predictor over records.
/// Predictions are in normalized orientation.
using RecordPredictor = std::function<double(const CurveRecord&)>;
using PredictorFactory = std::function<RecordPredictor(const CurveDataset& train, int tau, std::uint64_t seed)>;

/// Factory backed by a single-tau SRM fit.
inline PredictorFactory srm_factory(Backend backend, CVConfig cv, FeatureSchema schema = {}) {
  return [=](const CurveDataset& train, int tau, std::uint64_t seed) -> RecordPredictor {
    CVConfig c = cv;
    c.seed = seed;
    SrmFitOptions opts;
    opts.taus = std::vector<int>{tau};
    auto srm = std::make_shared<const SequentialRegressionModel>(fit_srm(train, backend, c, schema, opts));
    return [srm, tau](const CurveRecord& rec) {
      const auto scores = srm->orientation.normalize(rec.curve.prefix(tau));
      return srm->predict_normalized(rec.config, scores).value;
    };
  };
}

struct SweepRow {
  std::string label;
  double fraction = 0.0;
  int tau = 0;
  double mean_r2 = 0.0;
  double std_r2 = 0.0;
  double std_error = 0.0;
  std::vector<double> r2;
};

inline int tau_for_fraction(double fraction, int horizon) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("observed fraction must lie in (0, 1)");
  return std::clamp(static_cast<int>(std::ceil(fraction * horizon - 1e-9)), 1, horizon - 1);
}

namespace detail {

inline void finish_row(SweepRow& row) {
  const double n = static_cast<double>(row.r2.size());
  row.mean_r2 = std::accumulate(row.r2.begin(), row.r2.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : row.r2) ss += (v - row.mean_r2) * (v - row.mean_r2);
  row.std_r2 = row.r2.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  row.std_error = row.std_r2 / std::sqrt(n);
}

inline std::pair<CurveDataset, CurveDataset> split_dataset(const CurveDataset& ds, std::size_t train_size,
                                                           std::uint64_t seed, int repeat) {
  auto order = shuffled_order(ds.size(), seed, repeat);
  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
  std::vector<std::size_t> te(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
  return {ds.subset(tr), ds.subset(te)};
}

inline double heldout_r2(const CurveDataset& test, const RecordPredictor& predict) {
  std::vector<double> pred, truth;
  for (std::size_t i = 0; i < test.size(); ++i) {
    pred.push_back(predict(test.records[i]));
    truth.push_back(test.final_score(i));
  }
  return r_squared(pred, truth);
}

}  // namespace detail

/// For each repeat, draws a train/test split, fits each factory at each
/// observed fraction, and scores held-out R^2. Splits depend only on
/// (seed, repeat), so every cell of one call sees the same splits.
inline std::vector<SweepRow> prediction_sweep(const CurveDataset& ds, std::size_t train_size,
                                              const std::vector<double>& fractions,
                                              const std::vector<std::pair<std::string, PredictorFactory>>& factories,
                                              int repeats, std::uint64_t seed) {
  if (train_size + 2 > ds.size()) throw PreconditionError("train size leaves fewer than 2 held-out curves");
  if (repeats < 1) throw PreconditionError("repeats must be at least 1");
  std::vector<SweepRow> rows;
  for (const auto& [label, _] : factories)
    for (double f : fractions) rows.push_back({label, f, tau_for_fraction(f, ds.horizon), 0, 0, 0, {}});
  for (int rep = 0; rep < repeats; ++rep) {
    const auto [train, test] = detail::split_dataset(ds, train_size, seed, rep);
    std::size_t k = 0;
    for (const auto& entry : factories) {
      for (std::size_t j = 0; j < fractions.size(); ++j) {
        SweepRow& row = rows[k++];
        const auto& factory = entry.second;
        const auto predictor = factory(train, row.tau, derive_seed(seed, {static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(row.tau)}));
        row.r2.push_back(detail::heldout_r2(test, predictor));
      }
    }
  }
  for (auto& r : rows) detail::finish_row(r);
  return rows;
}

inline std::vector<SweepRow> prediction_sweep(const CurveDataset& ds, std::size_t train_size,
                                              const std::vector<double>& fractions, const std::vector<Backend>& backends,
                                              int repeats, const CVConfig& cv, std::uint64_t seed,
                                              const FeatureSchema& schema = {}) {
  std::vector<std::pair<std::string, PredictorFactory>> factories;
  for (Backend b : backends) factories.emplace_back(to_string(b), srm_factory(b, cv, schema));
  return prediction_sweep(ds, train_size, fractions, factories, repeats, seed);
}

/// The six subsets of the ablation table.
inline std::vector<FeatureSchema> ablation_subsets() {
  return {{true, false, false}, {false, true, false}, {false, false, true},
          {true, true, false},  {false, true, true},  {true, true, true}};
}

/// One sweep cell per feature subset at a single fraction.
inline std::vector<SweepRow> ablation_eval(const CurveDataset& ds, const std::vector<FeatureSchema>& subsets,
                                           double fraction, int repeats, std::size_t train_size, Backend backend,
                                           const CVConfig& cv, std::uint64_t seed) {
  std::vector<std::pair<std::string, PredictorFactory>> factories;
  for (const auto& s : subsets) {
    if (!s.valid()) throw PreconditionError("ablation subset selects no block");
    factories.emplace_back(s.name(), srm_factory(backend, cv, s));
  }
  return prediction_sweep(ds, train_size, {fraction}, factories, repeats, seed);
}

/// Trains on configs with depth <= threshold and scores R^2 on the rest.
inline double depth_generalization_eval(const CurveDataset& ds, const std::string& depth_key, double threshold,
                                        Backend backend, const CVConfig& cv, const FeatureSchema& schema = {},
                                        double fraction = 0.25) {
  std::vector<std::size_t> lo, hi;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = ds.records[i].config.ap.find(depth_key);
    if (it == ds.records[i].config.ap.end()) throw ValidationError("record '" + ds.records[i].id() + "' lacks ap key '" + depth_key + "'");
    (it->second <= threshold ? lo : hi).push_back(i);
  }
  if (lo.empty() || hi.empty()) throw PreconditionError("depth split leaves an empty side");
  if (static_cast<int>(lo.size()) < cv.folds) throw PreconditionError("depth split training side is smaller than the fold count");
  const int tau = tau_for_fraction(fraction, ds.horizon);
  const auto predictor = srm_factory(backend, cv, schema)(ds.subset(lo), tau, cv.seed);
  return detail::heldout_r2(ds.subset(hi), predictor);
}

}  // namespace lcpred
