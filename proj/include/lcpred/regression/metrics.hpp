// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>

#include "lcpred/common.hpp"

namespace lcpred {

/// Coefficient of determination, 1 - SS_res / SS_tot. May be negative.
inline double r_squared(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw PreconditionError("r_squared: length mismatch");
  if (truths.size() < 2) throw PreconditionError("r_squared needs at least two points");
  double mean = 0.0;
  for (double t : truths) mean += t;
  mean /= static_cast<double>(truths.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ss_res += (truths[i] - predictions[i]) * (truths[i] - predictions[i]);
    ss_tot += (truths[i] - mean) * (truths[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw PreconditionError("r_squared is undefined for constant truths");
  return 1.0 - ss_res / ss_tot;
}

/// The most recent observation, used as the naive final-value estimate.
inline double predict_last_seen(std::span<const double> observed) {
  if (observed.empty()) throw PreconditionError("last-seen prediction needs a non-empty curve");
  return observed.back();
}

}  // namespace lcpred
