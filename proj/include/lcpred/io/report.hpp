// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcpred/io/dataset_io.hpp"
#include "lcpred/scheduler/hyperband.hpp"
#include "lcpred/search_sim.hpp"

namespace lcpred::io {

// JSON/CSV renderings of evaluation results. Non-finite scores (the -inf
// sentinel) are written as null.

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json finite_list(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}

inline nlohmann::json to_json(const SweepRow& r) {
  return {{"label", r.label}, {"fraction", r.fraction}, {"tau", r.tau},    {"mean_r2", r.mean_r2},
          {"std_r2", r.std_r2}, {"std_error", r.std_error}, {"r2", r.r2}};
}

inline nlohmann::json to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows) a.push_back(to_json(r));
  return a;
}

inline std::string to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "label,fraction,tau,mean_r2,std_r2,std_error\n";
  for (const auto& r : rows)
    out += r.label + "," + format_double(r.fraction) + "," + std::to_string(r.tau) + "," + format_double(r.mean_r2) +
           "," + format_double(r.std_r2) + "," + format_double(r.std_error) + "\n";
  return out;
}

inline nlohmann::json to_json(const SimulationResult& res, const TerminationPolicy& policy) {
  nlohmann::json orderings = nlohmann::json::array();
  for (const auto& o : res.orderings) {
    orderings.push_back({{"epochs_used", o.epochs_used},
                         {"epochs_saved", o.epochs_saved},
                         {"recovered_optimal", o.recovered_optimal},
                         {"terminations", o.terminations},
                         {"terminated_good", o.terminated_good},
                         {"cumulative_best", finite_list(o.cumulative_best)},
                         {"error", o.error}});
  }
  return {{"policy",
           {{"delta_threshold", policy.delta_threshold}, {"offset", policy.offset}, {"top_n", policy.top_n}}},
          {"full_epochs", res.full_epochs},
          {"speedup", res.speedup},
          {"recovered", res.recovered},
          {"recovery_rate", res.recovery_rate},
          {"orderings", orderings}};
}

inline std::string to_csv(const SimulationResult& res, const TerminationPolicy& policy) {
  std::string out = "delta,ordering,epochs_used,epochs_saved,recovered_optimal,terminations,terminated_good\n";
  for (std::size_t i = 0; i < res.orderings.size(); ++i) {
    const auto& o = res.orderings[i];
    out += format_double(policy.delta_threshold) + "," + std::to_string(i) + "," + std::to_string(o.epochs_used) + "," +
           std::to_string(o.epochs_saved) + "," + (o.recovered_optimal ? "1" : "0") + "," +
           std::to_string(o.terminations) + "," + std::to_string(o.terminated_good) + "\n";
  }
  return out;
}

inline nlohmann::json to_json(const HyperbandResult& res) {
  const RunLedger& l = res.ledger;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : l.rounds)
    rounds.push_back({{"bracket", r.bracket}, {"round", r.round}, {"n", r.n}, {"r", r.r}, {"n_next", r.n_next},
                      {"trials", r.trials}, {"scores", finite_list(r.scores)}, {"predicted", r.predicted},
                      {"survivors", r.survivors}, {"clamped", r.clamped}, {"epochs", r.epochs}});
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& d : l.decisions)
    decisions.push_back({{"bracket", d.bracket}, {"round", d.round}, {"trial", d.trial}, {"tau", d.tau},
                         {"predicted", d.predicted}, {"sigma", d.sigma}, {"reference", finite_or_null(d.reference)},
                         {"probability", d.probability}, {"terminated", d.terminated}});
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < l.trials.size(); ++i)
    trials.push_back({{"id", l.trials[i].id}, {"key", l.trials[i].key}, {"source", l.trials[i].source},
                      {"ap", l.trials[i].config.ap}, {"hp", l.trials[i].config.hp}, {"epochs", l.epochs_per_trial[i]}});
  return {{"best_trial", res.best_trial},
          {"best_score", finite_or_null(res.best_score)},
          {"best_config", {{"ap", res.best_config.ap}, {"hp", res.best_config.hp}}},
          {"models_trained", res.models_trained},
          {"ledger",
           {{"resume", l.resume},
            {"total_epochs", l.total_epochs},
            {"epochs_saved", l.epochs_saved},
            {"failed_trials", l.failed_trials},
            {"best_trajectory", finite_list(l.best_trajectory)},
            {"trials", trials},
            {"rounds", rounds},
            {"decisions", decisions}}}};
}

}  // namespace lcpred::io
