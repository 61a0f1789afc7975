// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/scheduler/hyperband.hpp"
#include "lcpred/synth.hpp"

namespace lcpred {

namespace detail {

// Cursor over a precomputed curve per trial key.
class CurveCursorOracle : public EpochOracle {
 public:
  double run_one_epoch(const Trial& trial) override {
    auto& c = cursor(trial);
    if (c.pos >= c.values.size())
      throw Error("trial '" + trial.key + "' ran past its horizon of " + std::to_string(c.values.size()));
    ++executed_;
    return c.values[c.pos++];
  }

  void reset(const Trial& trial) override { cursor(trial).pos = 0; }

  /// Epochs actually executed across all trials.
  long executed() const { return executed_; }

 protected:
  virtual std::vector<double> curve_for(const Trial& trial) = 0;

 private:
  struct Cursor {
    std::vector<double> values;
    std::size_t pos = 0;
  };

  Cursor& cursor(const Trial& trial) {
    auto it = cursors_.find(trial.key);
    if (it == cursors_.end()) it = cursors_.emplace(trial.key, Cursor{curve_for(trial), 0}).first;
    return it->second;
  }

  std::unordered_map<std::string, Cursor> cursors_;
  long executed_ = 0;
};

}  // namespace detail

/// Renders each trial's curve from a curve family; noise is seeded from the
/// trial key, so a trial's curve is fixed for the oracle's seed.
class SyntheticOracle : public detail::CurveCursorOracle {
 public:
  SyntheticOracle(CurveFamilySpec family, std::uint64_t seed) : family_(std::move(family)), seed_(seed) {}

  MetricOrientation orientation() const override { return family_.orientation; }
  const CurveFamilySpec& family() const { return family_; }

  /// The full curve a trial would produce; no epochs are charged.
  LearningCurve true_curve(const Trial& trial) const {
    return render_curve(family_, trial.config, derive_seed(seed_, {fnv1a(trial.key)}), trial.key);
  }

 protected:
  std::vector<double> curve_for(const Trial& trial) override { return true_curve(trial).values; }

 private:
  CurveFamilySpec family_;
  std::uint64_t seed_;
};

/// Serves stored curves; each trial's `source` names a record id.
class ReplayOracle : public detail::CurveCursorOracle {
 public:
  explicit ReplayOracle(const CurveDataset& ds) : ds_(ds) {
    for (std::size_t i = 0; i < ds.size(); ++i) index_.emplace(ds.records[i].id(), i);
  }

  MetricOrientation orientation() const override { return ds_.orientation; }

 protected:
  std::vector<double> curve_for(const Trial& trial) override {
    auto it = index_.find(trial.source);
    if (it == index_.end()) throw Error("replay oracle has no record '" + trial.source + "'");
    return ds_.records[it->second].curve.values;
  }

 private:
  const CurveDataset& ds_;
  std::map<std::string, std::size_t> index_;
};

/// Samples descriptors from generator ranges.
inline ConfigSampler range_sampler(std::vector<SamplingRange> ranges) {
  return [ranges = std::move(ranges)](std::mt19937_64& rng) {
    return SampledConfig{sample_descriptor(ranges, rng), {}};
  };
}

/// Samples records uniformly (with replacement) from a dataset.
inline ConfigSampler replay_sampler(const CurveDataset& ds) {
  if (ds.size() == 0) throw PreconditionError("replay sampler needs a non-empty dataset");
  return [&ds](std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
    const auto& rec = ds.records[pick(rng)];
    return SampledConfig{rec.config, rec.id()};
  };
}

}  // namespace lcpred
