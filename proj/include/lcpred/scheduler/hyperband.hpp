// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/srm.hpp"
#include "lcpred/stopping.hpp"

namespace lcpred {

struct HyperbandParams {
  int R = 81;
  double eta = 3.0;

  void validate() const {
    if (R < 1) throw PreconditionError("Hyperband requires R >= 1");
    if (!(eta > 1.0) || !std::isfinite(eta)) throw PreconditionError("Hyperband requires eta > 1");
  }

  /// floor(log_eta R), computed without trusting log() at exact powers.
  int s_max() const {
    validate();
    int s = static_cast<int>(std::floor(std::log(static_cast<double>(R)) / std::log(eta)));
    while (std::pow(eta, s + 1) <= R * (1.0 + 1e-12)) ++s;
    while (s > 0 && std::pow(eta, s) > R * (1.0 + 1e-12)) --s;
    return s;
  }

  double budget() const { return static_cast<double>(s_max() + 1) * R; }
};

struct Round {
  int n = 0;  // configurations evaluated
  int r = 0;  // epochs each is trained to
  bool operator==(const Round&) const = default;
};

struct Bracket {
  int s = 0;
  int n = 0;
  int r = 0;
  std::vector<Round> rounds;
  bool operator==(const Bracket&) const = default;
};

namespace detail {
inline int floor_eps(double x) { return static_cast<int>(std::floor(x + 1e-9)); }
inline int ceil_eps(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }
}  // namespace detail

/// Brackets s = s_max..0 with their successive-halving rounds.
inline std::vector<Bracket> bracket_schedule(const HyperbandParams& p) {
  const int s_max = p.s_max();
  const double B = p.budget();
  std::vector<Bracket> out;
  for (int s = s_max; s >= 0; --s) {
    Bracket b;
    b.s = s;
    b.n = detail::ceil_eps(B / p.R * std::pow(p.eta, s) / (s + 1));
    const double r = p.R * std::pow(p.eta, -s);
    b.r = std::max(1, detail::floor_eps(r));
    for (int i = 0; i <= s; ++i)
      b.rounds.push_back({detail::floor_eps(b.n * std::pow(p.eta, -i)), std::max(1, detail::floor_eps(r * std::pow(p.eta, i)))});
    out.push_back(std::move(b));
  }
  return out;
}

/// Indices of the k highest scores; ties keep list order. k is clamped to
/// the list length.
inline std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

template <class T>
std::vector<T> top_k(const std::vector<T>& items, std::span<const double> scores, std::size_t k) {
  if (items.size() != scores.size()) throw PreconditionError("top_k: items and scores differ in length");
  std::vector<T> out;
  for (std::size_t i : top_k(scores, k)) out.push_back(items[i]);
  return out;
}

// ---------------------------------------------------------------------------

/// A configuration under evaluation. `key` is unique within an oracle's
/// lifetime; `source` optionally names the record a replay oracle serves.
struct Trial {
  int id = 0;
  std::string key;
  std::string source;
  ConfigDescriptor config;
  bool operator==(const Trial&) const = default;
};

struct SampledConfig {
  ConfigDescriptor config;
  std::string source;
};

using ConfigSampler = std::function<SampledConfig(std::mt19937_64&)>;

/// Trains one configuration an epoch at a time. Successive calls for a trial
/// extend one curve; reset rewinds it to epoch 0.
class EpochOracle {
 public:
  virtual ~EpochOracle() = default;
  virtual double run_one_epoch(const Trial& trial) = 0;  // raw metric
  virtual void reset(const Trial& trial) = 0;
  virtual MetricOrientation orientation() const { return {}; }
};

// ---------------------------------------------------------------------------

struct StoredCurve {
  ConfigDescriptor config;
  std::vector<double> scores;  // normalized, length r
};

/// D[r]: full curves observed at resource r. M[r]: a sequential model with
/// horizon r, i.e. one regressor per tau = 1..r-1, trained once when D[r]
/// holds d curves. Rows for every tau come from the same curves, so per-tau
/// row counts agree by construction.
class PredictorStore {
 public:
  PredictorStore(int d, CVConfig cv, Backend backend = Backend::nu_svr_rbf, FeatureSchema schema = {})
      : d_(d), cv_(cv), backend_(backend), schema_(schema) {
    if (d < 1) throw PreconditionError("predictor store requires d >= 1");
  }

  int d() const { return d_; }
  std::size_t rows(int r) const {
    auto it = data_.find(r);
    return it == data_.end() ? 0 : it->second.size();
  }
  const std::vector<StoredCurve>& curves(int r) const {
    static const std::vector<StoredCurve> empty;
    auto it = data_.find(r);
    return it == data_.end() ? empty : it->second;
  }

  /// Appends while |D[r]| < d. Returns whether the curve was kept.
  bool add(int r, const ConfigDescriptor& config, std::vector<double> scores) {
    if (static_cast<int>(scores.size()) != r) throw PreconditionError("stored curve length must equal r");
    auto& rows = data_[r];
    if (static_cast<int>(rows.size()) >= d_) return false;
    rows.push_back({config, std::move(scores)});
    return true;
  }

  /// Trains M[r] if D[r] is full and M[r] does not exist yet. Returns whether
  /// a model was trained. Horizons below 2 have no checkpoint to predict from.
  /// A failed fit is recorded and not retried; r then runs without a model.
  bool train_if_ready(int r) {
    if (r < 2 || models_.contains(r) || failures_.contains(r) || static_cast<int>(rows(r)) < d_) return false;
    const auto& rows = data_.at(r);
    CurveDataset ds;
    ds.horizon = r;
    ds.keys = FeatureKeys::of(rows.front().config);
    for (std::size_t i = 0; i < rows.size(); ++i)
      ds.records.push_back({rows[i].config, LearningCurve{"r" + std::to_string(r) + "-" + std::to_string(i), rows[i].scores, r}});
    CVConfig cv = cv_;
    cv.seed = derive_seed(cv_.seed, {static_cast<std::uint64_t>(r)});
    try {
      models_.emplace(r, fit_srm(ds, backend_, cv, schema_));
    } catch (const Error& e) {
      failures_.emplace(r, e.what());
      return false;
    }
    return true;
  }

  /// Fit errors by resource.
  const std::map<int, std::string>& failures() const { return failures_; }

  /// Installs a ready model for resource r, replacing any existing one.
  void install(int r, SequentialRegressionModel m) { models_.insert_or_assign(r, std::move(m)); }

  const SequentialRegressionModel* model(int r) const {
    auto it = models_.find(r);
    return it == models_.end() ? nullptr : &it->second;
  }

 private:
  int d_;
  CVConfig cv_;
  Backend backend_;
  FeatureSchema schema_;
  std::map<int, std::vector<StoredCurve>> data_;
  std::map<int, SequentialRegressionModel> models_;
  std::map<int, std::string> failures_;
};

// ---------------------------------------------------------------------------

struct DecisionRecord {
  int bracket = 0;
  int round = 0;
  int trial = 0;
  int tau = 0;
  double predicted = 0.0;
  double sigma = 0.0;
  double reference = kNegInf;
  double probability = 0.0;
  bool terminated = false;
  bool operator==(const DecisionRecord&) const = default;
};

struct RoundRecord {
  int bracket = 0;
  int round = 0;
  int n = 0;       // n_i from the schedule
  int r = 0;       // r_i
  int n_next = 0;  // floor(n_i / eta)
  std::vector<int> trials;
  std::vector<double> scores;
  std::vector<bool> predicted;  // score is a prediction (terminated early)
  std::vector<int> survivors;
  bool clamped = false;  // fewer configs than n_next were available
  long epochs = 0;
  bool operator==(const RoundRecord&) const = default;
};

struct RunLedger {
  bool resume = true;
  std::vector<Trial> trials;
  std::vector<long> epochs_per_trial;
  std::vector<RoundRecord> rounds;
  std::vector<DecisionRecord> decisions;
  std::vector<int> failed_trials;
  std::vector<double> best_trajectory;  // after each round, best true score at R
  long total_epochs = 0;
  long epochs_saved = 0;  // r - tau summed over terminations

  bool operator==(const RunLedger&) const = default;
};

struct HyperbandResult {
  int best_trial = -1;
  ConfigDescriptor best_config;
  double best_score = kNegInf;  // normalized, observed at R
  RunLedger ledger;
  std::vector<int> models_trained;  // resources r whose predictor trained during this run
};

struct FHyperbandParams {
  HyperbandParams base;
  double delta_threshold = 0.95;
  double offset = 0.0;
  int d = 100;
  double kappa = 0.5;

  void validate() const {
    base.validate();
    if (!(delta_threshold > 0.0 && delta_threshold < 1.0)) throw PreconditionError("f-Hyperband requires 0 < Delta < 1");
    if (!(offset >= 0.0)) throw PreconditionError("f-Hyperband requires offset >= 0");
    if (d < 1) throw PreconditionError("f-Hyperband requires d >= 1");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw PreconditionError("f-Hyperband requires 0 < kappa <= 1");
  }
};

struct HyperbandOptions {
  bool resume = true;  // survivors continue from their recorded curve
};

namespace detail {

struct TrialState {
  std::vector<double> curve;  // normalized scores observed so far
  bool failed = false;
};

struct RoundContext {
  int bracket = 0;
  int round = 0;
  int r = 0;
  int n_next = 0;
};

class HyperbandRunner {
 public:
  HyperbandRunner(EpochOracle& oracle, PredictorStore* store, const FHyperbandParams* fp, HyperbandOptions opts)
      : oracle_(oracle), store_(store), fp_(fp), opts_(opts) {
    ledger_.resume = opts.resume;
  }

  /// One round over `trials` at resource r with in-round termination. Returns
  /// one score per trial.
  std::vector<double> run_round(const std::vector<int>& trials, const RoundContext& ctx, RoundRecord& rec) {
    std::vector<double> L;  // scores reported so far this round
    std::vector<double> out;
    std::vector<int> completed;
    const SequentialRegressionModel* model = store_ ? store_->model(ctx.r) : nullptr;
    const int k = fp_ ? detail::ceil_eps(fp_->kappa * ctx.n_next) : 0;

    for (int id : trials) {
      TrialState& st = states_[static_cast<std::size_t>(id)];
      const Trial& trial = ledger_.trials[static_cast<std::size_t>(id)];
      double score = kNegInf;
      bool predicted = false;
      if (!st.failed) {
        try {
          if (!opts_.resume || static_cast<int>(st.curve.size()) > ctx.r) {
            oracle_.reset(trial);
            st.curve.clear();
          }
          while (static_cast<int>(st.curve.size()) < ctx.r) {
            const double raw = oracle_.run_one_epoch(trial);
            if (!std::isfinite(raw)) throw Error("oracle returned a non-finite metric");
            st.curve.push_back(oracle_.orientation().normalize(raw));
            charge(id, rec);
            const int tau = static_cast<int>(st.curve.size());
            if (tau == ctx.r) break;
            if (!model || !model->has(tau) || k < 1) continue;
            const FinalPrediction p = model->predict_normalized(trial.config, st.curve);
            std::vector<double> ranked = L;
            std::sort(ranked.begin(), ranked.end(), std::greater<>());
            TerminationPolicy pol;
            pol.delta_threshold = fp_->delta_threshold;
            pol.offset = fp_->offset;
            pol.top_n = k;
            const Decision d = should_terminate(pol, p.value, p.sigma, ranked);
            if (d.reference == kNegInf) continue;
            ledger_.decisions.push_back({ctx.bracket, ctx.round, id, tau, p.value, p.sigma, d.reference,
                                         d.probability, d.action == Action::terminate});
            if (d.action == Action::terminate) {
              score = p.value;
              predicted = true;
              ledger_.epochs_saved += ctx.r - tau;
              break;
            }
          }
          if (!predicted) {
            score = st.curve.back();
            completed.push_back(id);
          }
        } catch (const std::exception&) {
          st.failed = true;
          ledger_.failed_trials.push_back(id);
          score = kNegInf;
        }
      }
      L.push_back(score);
      out.push_back(score);
      rec.trials.push_back(id);
      rec.scores.push_back(score);
      rec.predicted.push_back(predicted);
    }

    // Store updates happen at the round boundary, in trial order.
    if (store_) {
      for (int id : completed)
        store_->add(ctx.r, ledger_.trials[static_cast<std::size_t>(id)].config,
                    std::vector<double>(states_[static_cast<std::size_t>(id)].curve.begin(),
                                        states_[static_cast<std::size_t>(id)].curve.begin() + ctx.r));
      if (store_->train_if_ready(ctx.r)) models_trained_.push_back(ctx.r);
    }
    return out;
  }

  HyperbandResult run(const HyperbandParams& p, const ConfigSampler& sampler, std::uint64_t seed) {
    p.validate();
    HyperbandResult res;
    for (const Bracket& b : bracket_schedule(p)) {
      auto rng = make_rng(seed, {0x627261ULL, static_cast<std::uint64_t>(b.s)});
      std::vector<int> population;
      for (int j = 0; j < b.n; ++j) {
        SampledConfig sc = sampler(rng);
        Trial t;
        t.id = static_cast<int>(ledger_.trials.size());
        t.key = std::to_string(seed) + "/" + std::to_string(t.id);
        t.source = std::move(sc.source);
        t.config = std::move(sc.config);
        ledger_.trials.push_back(std::move(t));
        ledger_.epochs_per_trial.push_back(0);
        states_.emplace_back();
        population.push_back(ledger_.trials.back().id);
      }
      for (int i = 0; i <= b.s; ++i) {
        const Round& rd = b.rounds[static_cast<std::size_t>(i)];
        RoundRecord rec;
        rec.bracket = b.s;
        rec.round = i;
        rec.n = rd.n;
        rec.r = rd.r;
        rec.n_next = detail::floor_eps(rd.n / p.eta);
        const auto scores = run_round(population, {b.s, i, rd.r, rec.n_next}, rec);
        for (std::size_t j = 0; j < population.size(); ++j) {
          if (rd.r == p.R && !rec.predicted[j] && scores[j] > res.best_score) {
            res.best_score = scores[j];
            res.best_trial = population[j];
          }
        }
        ledger_.best_trajectory.push_back(res.best_score);
        if (i < b.s) {
          rec.clamped = static_cast<int>(population.size()) < rec.n_next;
          population = top_k(population, scores, static_cast<std::size_t>(rec.n_next));
          rec.survivors = population;
        }
        ledger_.rounds.push_back(std::move(rec));
      }
    }
    if (res.best_trial >= 0) res.best_config = ledger_.trials[static_cast<std::size_t>(res.best_trial)].config;
    res.ledger = std::move(ledger_);
    res.models_trained = std::move(models_trained_);
    return res;
  }

 private:
  void charge(int id, RoundRecord& rec) {
    ++ledger_.epochs_per_trial[static_cast<std::size_t>(id)];
    ++ledger_.total_epochs;
    ++rec.epochs;
  }

  EpochOracle& oracle_;
  PredictorStore* store_;
  const FHyperbandParams* fp_;
  HyperbandOptions opts_;
  RunLedger ledger_;
  std::vector<TrialState> states_;
  std::vector<int> models_trained_;
};

}  // namespace detail

/// Plain Hyperband. Returns the best configuration among those observed at
/// the full resource R.
inline HyperbandResult run_hyperband(const HyperbandParams& params, EpochOracle& oracle,
                                     const ConfigSampler& sampler, std::uint64_t seed,
                                     HyperbandOptions opts = {}) {
  return detail::HyperbandRunner(oracle, nullptr, nullptr, opts).run(params, sampler, seed);
}

/// Hyperband with in-round early termination driven by `store`. The store is
/// passed in so consecutive runs can share training curves and models.
inline HyperbandResult run_f_hyperband(const FHyperbandParams& params, EpochOracle& oracle,
                                       const ConfigSampler& sampler, std::uint64_t seed,
                                       PredictorStore& store, HyperbandOptions opts = {}) {
  params.validate();
  if (store.d() != params.d) throw PreconditionError("predictor store threshold differs from params.d");
  return detail::HyperbandRunner(oracle, &store, &params, opts).run(params.base, sampler, seed);
}

/// Convenience overload with a fresh store (CV budget 50 per checkpoint).
inline HyperbandResult run_f_hyperband(const FHyperbandParams& params, EpochOracle& oracle,
                                       const ConfigSampler& sampler, std::uint64_t seed,
                                       HyperbandOptions opts = {}) {
  CVConfig cv;
  cv.search_budget = 50;
  cv.seed = derive_seed(seed, {0x73746f7265ULL});
  PredictorStore store(params.d, cv);
  return run_f_hyperband(params, oracle, sampler, seed, store, opts);
}

}  // namespace lcpred
