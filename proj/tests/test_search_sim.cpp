// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lcpred/regression/metrics.hpp"
#include "lcpred/search_sim.hpp"
#include "lcpred/synth.hpp"
#include "support/oracles.hpp"

using namespace lcpred;

namespace {

CurveDataset benchmark(int count, std::uint64_t seed = 1) {
  auto gen = presets::standard_benchmark();
  gen.count = count;
  gen.seed = seed;
  return generate_dataset(gen);
}

SimulationConfig small_sim(int burn_in = 40) {
  SimulationConfig sim;
  sim.orderings = 3;
  sim.burn_in = burn_in;
  sim.cv.search_budget = 15;
  sim.taus = std::vector<int>{2, 5, 10};
  sim.seed = 4;
  return sim;
}

}  // namespace

TEST(SequentialSearch, CertainThresholdNeverTerminates) {
  const auto ds = benchmark(80);
  auto sim = small_sim();
  sim.policy.delta_threshold = 1.0 - 1e-12;
  sim.policy.sigma_floor = 0.5;  // scores live in [0, 1], so z stays below 2
  const auto res = simulate_sequential_search(ds, sim);
  for (const auto& o : res.orderings) {
    EXPECT_EQ(o.terminations, 0);
    EXPECT_EQ(o.epochs_used, 80 * 20);
    EXPECT_TRUE(o.recovered_optimal);
  }
  EXPECT_EQ(res.speedup, 1.0);
  EXPECT_EQ(res.recovery_rate, 1.0);
}

TEST(SequentialSearch, FlatCurvesAreCutEarly) {
  // Each curve is flat at its final value, so one epoch reveals everything.
  std::vector<std::vector<double>> curves;
  std::vector<ConfigDescriptor> configs;
  for (int i = 0; i < 60; ++i) {
    const double q = 0.1 + 0.8 * ((i * 37) % 60) / 60.0;
    curves.emplace_back(10, q);
    configs.push_back({{{"width", static_cast<double>(i % 7)}}, {{"lr", 0.01}}});
  }
  const auto ds = oracle::make_dataset(curves, configs);
  SimulationConfig sim;
  sim.orderings = 4;
  sim.burn_in = 20;
  sim.cv.search_budget = 20;
  sim.schema = FeatureSchema{true, false, false};
  sim.backend = Backend::nu_svr_linear;
  sim.policy.delta_threshold = 0.9;
  sim.seed = 2;
  const auto res = simulate_sequential_search(ds, sim);
  EXPECT_EQ(res.recovery_rate, 1.0);
  EXPECT_GT(res.speedup, 1.5);
  for (const auto& o : res.orderings) EXPECT_TRUE(o.error.empty()) << o.error;
}

TEST(SequentialSearch, LedgerInvariants) {
  const auto ds = benchmark(90);
  auto sim = small_sim();
  std::vector<TerminationPolicy> policies(3);
  policies[0].delta_threshold = 0.8;
  policies[1].delta_threshold = 0.95;
  policies[2].delta_threshold = 0.99;
  const auto results = simulate_sequential_search(ds, sim, policies);
  ASSERT_EQ(results.size(), 3u);
  for (const auto& res : results) {
    EXPECT_EQ(res.full_epochs, 90 * 20);
    for (const auto& o : res.orderings) {
      EXPECT_EQ(o.epochs_used + o.epochs_saved, 90 * 20);
      EXPECT_LE(o.terminated_good, o.terminations);
      EXPECT_EQ(o.cumulative_best.size(), 90u);
      EXPECT_TRUE(std::is_sorted(o.cumulative_best.begin(), o.cumulative_best.end()));
      std::vector<std::size_t> sorted = o.order;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
      // No termination before the burn-in ends.
      EXPECT_LE(o.epochs_saved, static_cast<long>(90 - sim.burn_in) * 19);
    }
    EXPECT_GE(res.speedup, 1.0);
  }
  for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(results[0].orderings[o].order, results[2].orderings[o].order);
}

TEST(SequentialSearch, DeterministicForFixedSeed) {
  const auto ds = benchmark(70);
  const auto a = simulate_sequential_search(ds, small_sim());
  const auto b = simulate_sequential_search(ds, small_sim());
  ASSERT_EQ(a.orderings.size(), b.orderings.size());
  for (std::size_t i = 0; i < a.orderings.size(); ++i) {
    EXPECT_EQ(a.orderings[i].epochs_used, b.orderings[i].epochs_used);
    EXPECT_EQ(a.orderings[i].cumulative_best, b.orderings[i].cumulative_best);
  }
  EXPECT_EQ(a.speedup, b.speedup);
}

TEST(SequentialSearch, Preconditions) {
  const auto ds = benchmark(30);
  auto sim = small_sim(30);
  EXPECT_THROW(simulate_sequential_search(ds, sim), PreconditionError);
  sim.burn_in = 2;
  EXPECT_THROW(simulate_sequential_search(ds, sim), PreconditionError);
  sim = small_sim(10);
  sim.orderings = 0;
  EXPECT_THROW(simulate_sequential_search(ds, sim), PreconditionError);
}

TEST(PredictionSweep, PerfectPredictorScoresOne) {
  const auto ds = benchmark(60);
  PredictorFactory perfect = [](const CurveDataset&, int, std::uint64_t) {
    return [](const CurveRecord& r) { return r.curve.final_value(); };
  };
  const auto rows = prediction_sweep(ds, 40, {0.1, 0.5}, {{"perfect", perfect}}, 3, 7);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.mean_r2, 1.0);
    EXPECT_EQ(r.std_r2, 0.0);
    EXPECT_EQ(r.r2.size(), 3u);
  }
}

TEST(PredictionSweep, LastSeenAtTheFinalCheckpointMatchesDirectR2) {
  const auto ds = benchmark(60);
  const auto rows = prediction_sweep(ds, 30, {0.95}, {Backend::last_seen_value}, 2, CVConfig{}, 9,
                                     FeatureSchema{true, false, false});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].tau, 19);
  for (int rep = 0; rep < 2; ++rep) {
    const auto [train, test] = detail::split_dataset(ds, 30, 9, rep);
    std::vector<double> p, t;
    for (const auto& rec : test.records) {
      p.push_back(rec.curve.values[18]);
      t.push_back(rec.curve.final_value());
    }
    EXPECT_NEAR(rows[0].r2[static_cast<std::size_t>(rep)], r_squared(p, t), 1e-12);
  }
}

TEST(PredictionSweep, SummaryStatistics) {
  SweepRow row;
  row.r2 = {0.5, 0.7, 0.9};
  detail::finish_row(row);
  EXPECT_NEAR(row.mean_r2, 0.7, 1e-15);
  EXPECT_NEAR(row.std_r2, 0.2, 1e-15);
  EXPECT_NEAR(row.std_error, 0.2 / std::sqrt(3.0), 1e-15);
}

TEST(PredictionSweep, TauForFraction) {
  EXPECT_EQ(tau_for_fraction(0.1, 20), 2);
  EXPECT_EQ(tau_for_fraction(0.25, 20), 5);
  EXPECT_EQ(tau_for_fraction(0.01, 20), 1);
  EXPECT_EQ(tau_for_fraction(0.99, 20), 19);
  EXPECT_THROW(tau_for_fraction(1.0, 20), PreconditionError);
  EXPECT_THROW(tau_for_fraction(0.0, 20), PreconditionError);
}

TEST(PredictionSweep, Preconditions) {
  const auto ds = benchmark(20);
  EXPECT_THROW(prediction_sweep(ds, 19, {0.5}, {Backend::kernel_ols}, 1, CVConfig{}, 1), PreconditionError);
  EXPECT_THROW(prediction_sweep(ds, 10, {0.5}, {Backend::kernel_ols}, 0, CVConfig{}, 1), PreconditionError);
}

TEST(Ablation, SubsetsAndLabels) {
  const auto subsets = ablation_subsets();
  ASSERT_EQ(subsets.size(), 6u);
  std::vector<std::string> names;
  for (const auto& s : subsets) names.push_back(s.name());
  EXPECT_EQ(names, (std::vector<std::string>{"ts", "ap", "hp", "ts+ap", "ap+hp", "ts+ap+hp"}));
  EXPECT_THROW(ablation_eval(benchmark(20), {FeatureSchema{false, false, false}}, 0.1, 1, 10,
                             Backend::nu_svr_rbf, CVConfig{}, 1),
               PreconditionError);
}

TEST(DepthGeneralization, ArchitectureFeaturesHelpExtrapolation) {
  auto gen = presets::depth_linear_benchmark();
  gen.count = 160;
  const auto ds = generate_dataset(gen);
  CVConfig cv;
  cv.search_budget = 40;
  cv.seed = 1;
  const double with_ap = depth_generalization_eval(ds, "layers", 10, Backend::nu_svr_linear, cv);
  const double without = depth_generalization_eval(ds, "layers", 10, Backend::nu_svr_linear, cv,
                                                   FeatureSchema{true, false, true});
  EXPECT_GT(with_ap, without);
  EXPECT_GT(with_ap, 0.5);
}

TEST(DepthGeneralization, Preconditions) {
  const auto ds = benchmark(30);
  EXPECT_THROW(depth_generalization_eval(ds, "layers", 100, Backend::nu_svr_rbf, CVConfig{}), PreconditionError);
  EXPECT_THROW(depth_generalization_eval(ds, "depth", 5, Backend::nu_svr_rbf, CVConfig{}), ValidationError);
}
