// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "lcpred/io/dataset_io.hpp"
#include "lcpred/search_sim.hpp"
#include "lcpred/synth.hpp"

using namespace lcpred;

namespace {

CurveFamilySpec plain_family() {
  CurveFamilySpec f;
  f.horizon = 10;
  f.y_inf = 0.8;
  f.rate = 0.3;
  f.y0 = 0.1;
  return f;
}

}  // namespace

TEST(RenderCurve, NoiselessMatchesClosedForm) {
  const auto f = plain_family();
  const auto c = render_curve(f, {}, 1);
  ASSERT_EQ(c.values.size(), 10u);
  for (int t = 1; t <= 10; ++t)
    EXPECT_NEAR(c.values[static_cast<std::size_t>(t - 1)], 0.8 - 0.7 * std::exp(-0.3 * t), 1e-15);
}

TEST(RenderCurve, FastRateIsFlatAtTheAsymptote) {
  auto f = plain_family();
  f.rate = 50.0;
  const auto c = render_curve(f, {}, 1);
  for (double v : c.values) EXPECT_NEAR(v, 0.8, 1e-15);
}

TEST(RenderCurve, DropsSuperpose) {
  auto f = plain_family();
  const auto base = render_curve(f, {}, 1);
  f.drops = {{4, 0.05}, {7, 0.02}};
  const auto c = render_curve(f, {}, 1);
  for (int t = 1; t <= 10; ++t) {
    const double add = (t >= 4 ? 0.05 : 0.0) + (t >= 7 ? 0.02 : 0.0);
    EXPECT_NEAR(c.values[static_cast<std::size_t>(t - 1)], base.values[static_cast<std::size_t>(t - 1)] + add, 1e-15);
  }
}

TEST(RenderCurve, ValuesAreClippedToTheUnitInterval) {
  auto f = plain_family();
  f.y_inf = 1.4;
  f.noise_std = 0.2;
  const auto c = render_curve(f, {}, 3);
  for (double v : c.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(RenderCurve, CouplingMovesTheAsymptote) {
  auto f = plain_family();
  f.rate = 50.0;
  f.y_inf = 0.2;
  f.coupling = {{"y_inf", "ap", "width", "linear", 0.0, 10.0, 0.5}};
  for (double w : {0.0, 2.5, 10.0}) {
    const auto c = render_curve(f, {{{"width", w}}, {}}, 1);
    EXPECT_NEAR(c.values.back(), 0.2 + 0.5 * w / 10.0, 1e-15);
  }
  f.coupling = {{"y_inf", "ap", "depth", "linear", 0.0, 1.0, 0.5}};
  EXPECT_THROW(render_curve(f, {{{"width", 1.0}}, {}}, 1), ValidationError);
}

TEST(RenderCurve, BumpPeaksAtTheCentre) {
  CouplingTerm t{"y_inf", "hp", "lr", "log10_bump", -4.0, -1.0, 0.2, 0.5, 0.5};
  EXPECT_NEAR(detail::coupling_value(t, std::pow(10.0, -2.5)), 0.2, 1e-15);
  EXPECT_NEAR(detail::coupling_value(t, 1e-4), 0.0, 1e-15);
  EXPECT_NEAR(detail::coupling_value(t, 1e-1), 0.0, 1e-15);
}

TEST(GenerateDataset, SameSeedSameChecksum) {
  auto gen = presets::standard_benchmark();
  gen.count = 50;
  EXPECT_EQ(io::dataset_checksum(generate_dataset(gen)), io::dataset_checksum(generate_dataset(gen)));
  auto other = gen;
  other.seed += 1;
  EXPECT_NE(io::dataset_checksum(generate_dataset(gen)), io::dataset_checksum(generate_dataset(other)));
}

TEST(GenerateDataset, PrefixOfALargerRunIsIdentical) {
  auto small = presets::standard_benchmark();
  small.count = 20;
  auto large = small;
  large.count = 60;
  const auto a = generate_dataset(small), b = generate_dataset(large);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.records[i].curve.values, b.records[i].curve.values);
    EXPECT_EQ(a.records[i].config, b.records[i].config);
  }
}

TEST(GenerateDataset, PresetsProduceValidDatasets) {
  for (const char* name : {"standard", "hp_decoupled", "depth_linear", "hyperband"}) {
    auto gen = presets::by_name(name);
    gen.count = 40;
    const auto ds = generate_dataset(gen);
    EXPECT_NO_THROW(validate_dataset(ds)) << name;
    std::set<std::string> ids;
    for (const auto& r : ds.records) ids.insert(r.curve.id);
    EXPECT_EQ(ids.size(), ds.size());
  }
  EXPECT_THROW(presets::by_name("nope"), ValidationError);
}

TEST(GenerateDataset, FinalValueAgreesWithRenderedCurve) {
  const auto gen = presets::standard_benchmark();
  const auto ds = generate_dataset(gen);
  for (int i = 0; i < gen.count; i += 37) EXPECT_EQ(final_value(gen, i), ds.records[static_cast<std::size_t>(i)].curve.final_value());
}

TEST(GenerateDataset, RangesAreRespected) {
  const auto ds = generate_dataset(presets::standard_benchmark());
  for (const auto& r : ds.records) {
    const double layers = r.config.ap.at("layers"), weights = r.config.ap.at("weights"), lr = r.config.hp.at("lr");
    EXPECT_GE(layers, 2);
    EXPECT_LE(layers, 12);
    EXPECT_EQ(layers, std::round(layers));
    EXPECT_GE(weights, 1e4);
    EXPECT_LE(weights, 1e6);
    EXPECT_GE(lr, 1e-4);
    EXPECT_LE(lr, 1e-1);
  }
}

TEST(Manifest, RoundTripIsByteIdentical) {
  for (const char* name : {"standard", "hp_decoupled", "depth_linear", "hyperband"}) {
    const auto gen = presets::by_name(name);
    const std::string text = to_manifest(gen).dump(2);
    const auto back = from_manifest(nlohmann::json::parse(text));
    EXPECT_EQ(to_manifest(back).dump(2), text);
    auto a = gen, b = back;
    a.count = b.count = 10;
    EXPECT_EQ(io::to_jsonl(generate_dataset(a)), io::to_jsonl(generate_dataset(b)));
  }
}

TEST(Manifest, RejectsWrongVersionAndShape) {
  auto j = to_manifest(presets::standard_benchmark());
  j["manifest_version"] = 99;
  EXPECT_THROW(from_manifest(j), VersionError);
  j = to_manifest(presets::standard_benchmark());
  j.erase("family");
  EXPECT_THROW(from_manifest(j), ValidationError);
  j = to_manifest(presets::standard_benchmark());
  j["format"] = "other";
  EXPECT_THROW(from_manifest(j), ValidationError);
}

TEST(SampleDescriptor, RejectsBadRanges) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_descriptor({{"ap", "x", "uniform", 2.0, 1.0}}, rng), ValidationError);
  EXPECT_THROW(sample_descriptor({{"ap", "x", "log_uniform", 0.0, 1.0}}, rng), ValidationError);
  EXPECT_THROW(sample_descriptor({{"ap", "x", "gamma", 0.0, 1.0}}, rng), ValidationError);
  EXPECT_THROW(sample_descriptor({{"zz", "x", "uniform", 0.0, 1.0}}, rng), ValidationError);
}

TEST(Benchmark, DescriptorsAloneCarrySignal) {
  auto gen = presets::standard_benchmark();
  gen.count = 200;
  const auto ds = generate_dataset(gen);
  CVConfig cv;
  cv.search_budget = 30;
  const auto rows =
      ablation_eval(ds, {FeatureSchema{false, true, true}}, 0.25, 2, 100, Backend::nu_svr_rbf, cv, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GT(rows[0].mean_r2, 0.0);
}
