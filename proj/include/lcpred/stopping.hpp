// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "lcpred/common.hpp"

namespace lcpred {

inline constexpr double kDefaultSigmaFloor = 1e-6;

/// Parameters of the probabilistic termination rule.
struct TerminationPolicy {
  double delta_threshold = 0.99;  // terminate when P(final <= reference) >= this
  double offset = 0.0;            // slack subtracted from the reference
  int top_n = 1;                  // compare against the n-th best finished score
  double sigma_floor = kDefaultSigmaFloor;

  void validate() const {
    if (!(delta_threshold > 0.0 && delta_threshold < 1.0))
      throw PreconditionError("delta threshold must lie in (0, 1)");
    if (!(offset >= 0.0)) throw PreconditionError("offset must be nonnegative");
    if (top_n < 1) throw PreconditionError("top_n must be at least 1");
    if (!(sigma_floor > 0.0)) throw PreconditionError("sigma floor must be positive");
  }
};

enum class Action { continue_training, terminate };

inline const char* to_string(Action a) {
  return a == Action::terminate ? "terminate" : "continue";
}

struct Decision {
  Action action = Action::continue_training;
  double probability = 0.0;
  double reference = kNegInf;  // -inf while no incumbent exists

  bool operator==(const Decision&) const = default;
};

/// Gaussian CDF via erfc, which stays accurate in the lower tail.
inline double normal_cdf(double x, double mean, double stddev) {
  if (!(stddev > 0.0)) throw PreconditionError("normal_cdf requires a positive standard deviation");
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::sqrt(2.0)));
}

/// k-th largest of `values` (k >= 1), or -inf when there are fewer than k.
inline double max_k(std::span<const double> values, int k) {
  if (k < 1) throw PreconditionError("max_k requires k >= 1");
  if (values.size() < static_cast<std::size_t>(k)) return kNegInf;
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end(), std::greater<>());
  return v[static_cast<std::size_t>(k - 1)];
}

/// Stop/continue for one partially observed configuration. `best_desc` holds
/// finished scores in descending order (normalized orientation).
inline Decision should_terminate(const TerminationPolicy& policy, double predicted, double sigma,
                                 std::span<const double> best_desc) {
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive (apply the floor first)");
  Decision d;
  if (best_desc.size() < static_cast<std::size_t>(policy.top_n)) return d;
  d.reference = best_desc[static_cast<std::size_t>(policy.top_n - 1)] - policy.offset;
  d.probability = normal_cdf(d.reference, predicted, sigma);
  d.action = d.probability >= policy.delta_threshold ? Action::terminate : Action::continue_training;
  return d;
}

/// Inserts `score` keeping `best_desc` sorted descending; equal scores keep
/// insertion order.
inline void update_best(std::vector<double>& best_desc, double score) {
  if (std::isnan(score)) throw PreconditionError("cannot record a NaN score");
  auto pos = std::upper_bound(best_desc.begin(), best_desc.end(), score, std::greater<>());
  best_desc.insert(pos, score);
}

}  // namespace lcpred
