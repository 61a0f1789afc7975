// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"

namespace lcpred {

// Synthetic learning curves:
//
//   y(t) = y_inf - (y_inf - y0) * exp(-rate * t) + sum_{drops with epoch <= t} height + noise
//
// Each shape parameter is a base value plus coupling terms computed from the
// configuration descriptor, so a noiseless curve is a pure function of the
// descriptor. Drops mimic stepwise learning-rate decay.

/// One additive contribution `weight * g(u)` to a shape parameter, where u is
/// the descriptor field mapped onto [0, 1] by (t(x) - lo) / (hi - lo), t is
/// identity or log10, and g is identity ("linear"/"log10") or the parabola
/// 1 - ((u - center) / width)^2 ("bump"/"log10_bump").
struct CouplingTerm {
  std::string target;  // "y_inf", "rate", "y0" or "jump<k>" (k indexes drops)
  std::string block;   // "ap" or "hp"
  std::string key;
  std::string transform = "linear";
  double lo = 0.0;
  double hi = 1.0;
  double weight = 0.0;
  double center = 0.5;
  double width = 0.5;
};

struct Drop {
  int epoch = 0;
  double height = 0.0;
};

struct CurveFamilySpec {
  int horizon = 20;
  double y_inf = 0.8;
  double rate = 0.3;
  double y0 = 0.1;
  std::vector<Drop> drops;
  double noise_std = 0.0;
  std::vector<CouplingTerm> coupling;
  MetricOrientation orientation;
  double min_rate = 1e-3;
};

struct SamplingRange {
  std::string block;  // "ap" or "hp"
  std::string key;
  std::string dist = "uniform";  // uniform | log_uniform | int_uniform | int_log_uniform
  double lo = 0.0;
  double hi = 1.0;
};

struct GeneratorConfig {
  std::string name = "custom";
  int version = 1;
  CurveFamilySpec family;
  int count = 1;
  std::vector<SamplingRange> ranges;
  std::uint64_t seed = 0;
};

/// Shape parameters after coupling.
struct CurveShape {
  double y_inf = 0.0;
  double rate = 0.0;
  double y0 = 0.0;
  std::vector<Drop> drops;
};

namespace detail {

inline double descriptor_field(const ConfigDescriptor& c, const std::string& block, const std::string& key) {
  const auto& m = block == "ap" ? c.ap : c.hp;
  if (block != "ap" && block != "hp") throw ValidationError("coupling block must be 'ap' or 'hp', got '" + block + "'");
  auto it = m.find(key);
  if (it == m.end()) throw ValidationError("coupling references missing " + block + " key '" + key + "'");
  return it->second;
}

inline double coupling_value(const CouplingTerm& term, double x) {
  const bool log = term.transform == "log10" || term.transform == "log10_bump";
  const bool bump = term.transform == "bump" || term.transform == "log10_bump";
  if (!log && !bump && term.transform != "linear")
    throw ValidationError("unknown coupling transform '" + term.transform + "'");
  if (log && !(x > 0.0)) throw ValidationError("log10 coupling on non-positive '" + term.key + "'");
  const double t = log ? std::log10(x) : x;
  const double u = term.hi != term.lo ? (t - term.lo) / (term.hi - term.lo) : 0.0;
  if (!bump) return term.weight * u;
  const double v = (u - term.center) / term.width;
  return term.weight * (1.0 - v * v);
}

// Counter-based noise: epoch t of a curve draws from its own stream, so any
// single epoch can be reproduced without generating the ones before it.
inline double epoch_noise(std::uint64_t curve_seed, int epoch, double stddev) {
  if (stddev <= 0.0) return 0.0;
  auto rng = make_rng(curve_seed, {static_cast<std::uint64_t>(epoch)});
  std::normal_distribution<double> n(0.0, stddev);
  return n(rng);
}

inline double clip_value(double v, MetricOrientation o) {
  if (o.direction == Orientation::higher_is_better) return std::clamp(v, 0.0, 1.0);
  return std::max(v, 1e-6);
}

}  // namespace detail

inline CurveShape resolve_shape(const CurveFamilySpec& spec, const ConfigDescriptor& config) {
  CurveShape s{spec.y_inf, spec.rate, spec.y0, spec.drops};
  for (const auto& term : spec.coupling) {
    const double v = detail::coupling_value(term, detail::descriptor_field(config, term.block, term.key));
    if (term.target == "y_inf") s.y_inf += v;
    else if (term.target == "rate") s.rate += v;
    else if (term.target == "y0") s.y0 += v;
    else if (term.target.rfind("jump", 0) == 0) {
      const auto k = static_cast<std::size_t>(std::stoul(term.target.substr(4)));
      if (k >= s.drops.size()) throw ValidationError("coupling target '" + term.target + "' has no drop");
      s.drops[k].height += v;
    } else {
      throw ValidationError("unknown coupling target '" + term.target + "'");
    }
  }
  s.rate = std::max(s.rate, spec.min_rate);
  return s;
}

/// Noiseless, unclipped curve value at epoch t (1-based).
inline double shape_value(const CurveShape& s, int t) {
  double v = s.y_inf - (s.y_inf - s.y0) * std::exp(-s.rate * t);
  for (const auto& d : s.drops)
    if (t >= d.epoch) v += d.height;
  return v;
}

inline LearningCurve render_curve(const CurveFamilySpec& spec, const ConfigDescriptor& config,
                                  std::uint64_t seed, std::string id = {}) {
  if (spec.horizon < 1) throw ValidationError("curve family horizon must be positive");
  const CurveShape s = resolve_shape(spec, config);
  LearningCurve c{std::move(id), {}, spec.horizon};
  c.values.reserve(static_cast<std::size_t>(spec.horizon));
  for (int t = 1; t <= spec.horizon; ++t) {
    const double v = shape_value(s, t) + detail::epoch_noise(seed, t, spec.noise_std);
    c.values.push_back(detail::clip_value(v, spec.orientation));
  }
  return c;
}

/// Draws one descriptor from the declared ranges.
inline ConfigDescriptor sample_descriptor(const std::vector<SamplingRange>& ranges, std::mt19937_64& rng) {
  ConfigDescriptor c;
  for (const auto& r : ranges) {
    double v = 0.0;
    if (r.lo > r.hi) throw ValidationError("sampling range for '" + r.key + "' has lo > hi");
    if (r.dist == "uniform") {
      v = r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
    } else if (r.dist == "log_uniform") {
      if (!(r.lo > 0.0)) throw ValidationError("log_uniform range for '" + r.key + "' must be positive");
      v = r.lo == r.hi ? r.lo
                       : std::exp(std::uniform_real_distribution<double>(std::log(r.lo), std::log(r.hi))(rng));
    } else if (r.dist == "int_uniform") {
      v = static_cast<double>(std::uniform_int_distribution<long long>(std::llround(r.lo), std::llround(r.hi))(rng));
    } else if (r.dist == "int_log_uniform") {
      if (!(r.lo > 0.0)) throw ValidationError("int_log_uniform range for '" + r.key + "' must be positive");
      v = r.lo == r.hi ? std::round(r.lo)
                       : std::round(std::exp(std::uniform_real_distribution<double>(std::log(r.lo), std::log(r.hi))(rng)));
    } else {
      throw ValidationError("unknown sampling distribution '" + r.dist + "'");
    }
    if (r.block == "ap") c.ap[r.key] = v;
    else if (r.block == "hp") c.hp[r.key] = v;
    else throw ValidationError("sampling block must be 'ap' or 'hp', got '" + r.block + "'");
  }
  return c;
}

inline ConfigDescriptor sample_config(const GeneratorConfig& gen, int index) {
  if (index < 0 || index >= gen.count) throw PreconditionError("config index out of range");
  auto rng = make_rng(gen.seed, {0x636667ULL, static_cast<std::uint64_t>(index)});
  return sample_descriptor(gen.ranges, rng);
}

inline std::uint64_t curve_seed(const GeneratorConfig& gen, int index) {
  return derive_seed(gen.seed, {0x637276ULL, static_cast<std::uint64_t>(index)});
}

inline std::string config_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cfg-%05d", index);
  return buf;
}

/// True final value of curve `index`, computed from the generator parameters
/// alone (one epoch evaluated, no curve rendering).
inline double final_value(const GeneratorConfig& gen, int index) {
  const CurveFamilySpec& f = gen.family;
  const CurveShape s = resolve_shape(f, sample_config(gen, index));
  const double v = shape_value(s, f.horizon) + detail::epoch_noise(curve_seed(gen, index), f.horizon, f.noise_std);
  return detail::clip_value(v, f.orientation);
}

inline CurveDataset generate_dataset(const GeneratorConfig& gen) {
  if (gen.count < 1) throw ValidationError("generator count must be at least 1");
  CurveDataset ds;
  ds.orientation = gen.family.orientation;
  ds.horizon = gen.family.horizon;
  ds.records.reserve(static_cast<std::size_t>(gen.count));
  for (int i = 0; i < gen.count; ++i) {
    CurveRecord rec;
    rec.config = sample_config(gen, i);
    rec.curve = render_curve(gen.family, rec.config, curve_seed(gen, i), config_id(i));
    ds.records.push_back(std::move(rec));
  }
  ds.keys = FeatureKeys::of(ds.records.front().config);
  return ds;
}

// ---------------------------------------------------------------------------
// Presets. These are versioned and frozen: the acceptance numbers refer to
// them by name and version.

namespace presets {

inline std::vector<SamplingRange> standard_ranges() {
  return {
      {"ap", "layers", "int_uniform", 2, 12},
      {"ap", "weights", "int_log_uniform", 1e4, 1e6},
      {"hp", "lr", "log_uniform", 1e-4, 1e-1},
  };
}

/// Accuracy curves: capacity (weights), depth and learning rate set the
/// asymptote; learning rate and depth set the speed; learning rate sets the
/// gain from the decay step, which the early curve does not reveal.
inline CurveFamilySpec standard_family(int horizon, int drop_epoch, bool couple_hp = true) {
  CurveFamilySpec f;
  f.horizon = horizon;
  f.y_inf = 0.20;
  f.rate = 0.12;
  f.y0 = 0.10;
  f.noise_std = 0.01;
  f.drops = {{drop_epoch, 0.03}};
  f.min_rate = 0.02;
  f.coupling = {
      {"y_inf", "ap", "weights", "log10", 4, 6, 0.25},
      {"y_inf", "ap", "layers", "bump", 2, 12, 0.15, 0.5, 0.5},
      {"rate", "ap", "layers", "linear", 2, 12, -0.08},
  };
  if (couple_hp) {
    f.coupling.push_back({"y_inf", "hp", "lr", "log10_bump", -4, -1, 0.20, 0.55, 0.55});
    f.coupling.push_back({"rate", "hp", "lr", "log10", -4, -1, 0.40});
    f.coupling.push_back({"jump0", "hp", "lr", "log10", -4, -1, 0.10});
  } else {
    f.y_inf += 0.12;
    f.rate += 0.20;
    f.drops[0].height += 0.05;
  }
  return f;
}

/// The frozen benchmark: N=1000, T=20, noise 0.01, decay step at epoch 12.
inline GeneratorConfig standard_benchmark() {
  GeneratorConfig g;
  g.name = "standard";
  g.version = 1;
  g.family = standard_family(20, 12);
  g.count = 1000;
  g.ranges = standard_ranges();
  g.seed = 20170401;
  return g;
}

/// Same ranges and seed, but the learning rate has no effect on the curve.
inline GeneratorConfig hp_decoupled_benchmark() {
  GeneratorConfig g = standard_benchmark();
  g.name = "hp_decoupled";
  g.family = standard_family(20, 12, false);
  return g;
}

/// Depth adds linearly to the gain after the decay step, so an early
/// prefix cannot see it and only the AP block carries it.
inline GeneratorConfig depth_linear_benchmark() {
  GeneratorConfig g;
  g.name = "depth_linear";
  g.version = 1;
  g.family = standard_family(20, 12);
  g.family.coupling.erase(g.family.coupling.begin() + 1, g.family.coupling.begin() + 3);
  g.family.coupling.push_back({"jump0", "ap", "layers", "linear", 0, 20, 0.20});
  g.count = 400;
  g.ranges = standard_ranges();
  g.ranges[0].hi = 20;
  g.seed = 20170402;
  return g;
}

/// Horizon-27 family used as the Hyperband workload (R = 27).
inline GeneratorConfig hyperband_workload() {
  GeneratorConfig g;
  g.name = "hyperband";
  g.version = 1;
  g.family = standard_family(27, 16);
  g.count = 1;
  g.ranges = standard_ranges();
  g.seed = 20170403;
  return g;
}

inline GeneratorConfig by_name(const std::string& name) {
  if (name == "standard") return standard_benchmark();
  if (name == "hp_decoupled") return hp_decoupled_benchmark();
  if (name == "depth_linear") return depth_linear_benchmark();
  if (name == "hyperband") return hyperband_workload();
  throw ValidationError("unknown preset '" + name + "'");
}

}  // namespace presets

// ---------------------------------------------------------------------------
// Manifest (JSON). Records every generator parameter.

inline constexpr int kManifestVersion = 1;

inline nlohmann::json to_manifest(const GeneratorConfig& g) {
  using nlohmann::json;
  json terms = json::array();
  for (const auto& t : g.family.coupling)
    terms.push_back({{"target", t.target}, {"block", t.block}, {"key", t.key}, {"transform", t.transform},
                     {"lo", t.lo}, {"hi", t.hi}, {"weight", t.weight}, {"center", t.center}, {"width", t.width}});
  json drops = json::array();
  for (const auto& d : g.family.drops) drops.push_back({{"epoch", d.epoch}, {"height", d.height}});
  json ranges = json::array();
  for (const auto& r : g.ranges)
    ranges.push_back({{"block", r.block}, {"key", r.key}, {"dist", r.dist}, {"lo", r.lo}, {"hi", r.hi}});
  return {
      {"format", "lcpred.manifest"},
      {"manifest_version", kManifestVersion},
      {"name", g.name},
      {"version", g.version},
      {"seed", g.seed},
      {"count", g.count},
      {"family",
       {{"horizon", g.family.horizon},
        {"y_inf", g.family.y_inf},
        {"rate", g.family.rate},
        {"y0", g.family.y0},
        {"min_rate", g.family.min_rate},
        {"noise_std", g.family.noise_std},
        {"orientation", to_string(g.family.orientation.direction)},
        {"drops", drops},
        {"coupling", terms}}},
      {"ranges", ranges},
  };
}

inline GeneratorConfig from_manifest(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "lcpred.manifest") throw ValidationError("not a generator manifest");
    if (j.at("manifest_version").get<int>() != kManifestVersion)
      throw VersionError("unsupported manifest version " + j.at("manifest_version").dump());
    GeneratorConfig g;
    g.name = j.at("name").get<std::string>();
    g.version = j.at("version").get<int>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.count = j.at("count").get<int>();
    const auto& f = j.at("family");
    g.family.horizon = f.at("horizon").get<int>();
    g.family.y_inf = f.at("y_inf").get<double>();
    g.family.rate = f.at("rate").get<double>();
    g.family.y0 = f.at("y0").get<double>();
    g.family.min_rate = f.at("min_rate").get<double>();
    g.family.noise_std = f.at("noise_std").get<double>();
    g.family.orientation.direction = parse_orientation(f.at("orientation").get<std::string>());
    for (const auto& d : f.at("drops")) g.family.drops.push_back({d.at("epoch").get<int>(), d.at("height").get<double>()});
    for (const auto& t : f.at("coupling"))
      g.family.coupling.push_back({t.at("target").get<std::string>(), t.at("block").get<std::string>(),
                                   t.at("key").get<std::string>(), t.at("transform").get<std::string>(),
                                   t.at("lo").get<double>(), t.at("hi").get<double>(), t.at("weight").get<double>(),
                                   t.at("center").get<double>(), t.at("width").get<double>()});
    for (const auto& r : j.at("ranges"))
      g.ranges.push_back({r.at("block").get<std::string>(), r.at("key").get<std::string>(),
                          r.at("dist").get<std::string>(), r.at("lo").get<double>(), r.at("hi").get<double>()});
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace lcpred
