// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lcpred/common.hpp"

namespace lcpred {

enum class Orientation { higher_is_better, lower_is_better };

/// Maps raw metric values onto the internal "higher is better" score.
/// Accuracy passes through; perplexity-like metrics are negated.
struct MetricOrientation {
  Orientation direction = Orientation::higher_is_better;

  double normalize(double raw) const {
    return direction == Orientation::higher_is_better ? raw : -raw;
  }
  // Negation is its own inverse.
  double denormalize(double score) const { return normalize(score); }

  std::vector<double> normalize(std::span<const double> raw) const {
    std::vector<double> out(raw.begin(), raw.end());
    if (direction == Orientation::lower_is_better) {
      for (double& v : out) v = -v;
    }
    return out;
  }

  bool operator==(const MetricOrientation&) const = default;
};

inline std::string to_string(Orientation o) {
  return o == Orientation::higher_is_better ? "higher_is_better" : "lower_is_better";
}

inline Orientation parse_orientation(const std::string& s) {
  if (s == "higher_is_better") return Orientation::higher_is_better;
  if (s == "lower_is_better") return Orientation::lower_is_better;
  throw ValidationError("unknown orientation '" + s + "'");
}

/// Checks a raw metric value against the range its orientation allows.
inline bool value_in_range(double v, MetricOrientation o) {
  if (!std::isfinite(v)) return false;
  if (o.direction == Orientation::higher_is_better) return v >= 0.0 && v <= 1.0;
  return v > 0.0;
}

/// Per-configuration series of validation metric values (raw orientation).
struct LearningCurve {
  std::string id;
  std::vector<double> values;
  int horizon = 0;

  bool complete() const { return static_cast<int>(values.size()) == horizon; }

  /// First `tau` observations. Requires 1 <= tau <= values.size().
  std::span<const double> prefix(int tau) const {
    if (tau < 1 || static_cast<std::size_t>(tau) > values.size()) {
      throw PreconditionError("curve '" + id + "': prefix length " + std::to_string(tau) +
                              " outside [1, " + std::to_string(values.size()) + "]");
    }
    return std::span<const double>(values).first(static_cast<std::size_t>(tau));
  }

  double final_value() const {
    if (!complete()) throw PreconditionError("curve '" + id + "' is not complete");
    return values.back();
  }

  bool operator==(const LearningCurve&) const = default;
};

/// Architecture parameters and training hyperparameters of one configuration.
/// std::map keeps keys lexicographically ordered, which fixes feature layout.
struct ConfigDescriptor {
  std::map<std::string, double> ap;
  std::map<std::string, double> hp;

  bool operator==(const ConfigDescriptor&) const = default;
};

/// Dataset-wide AP and HP key sets, each sorted.
struct FeatureKeys {
  std::vector<std::string> ap;
  std::vector<std::string> hp;

  static FeatureKeys of(const ConfigDescriptor& c) {
    FeatureKeys k;
    for (const auto& [name, _] : c.ap) k.ap.push_back(name);
    for (const auto& [name, _] : c.hp) k.hp.push_back(name);
    return k;
  }

  bool matches(const ConfigDescriptor& c) const { return *this == of(c); }

  bool operator==(const FeatureKeys&) const = default;
};

struct FeatureSchema {
  bool use_ts = true;
  bool use_ap = true;
  bool use_hp = true;

  bool valid() const { return use_ts || use_ap || use_hp; }

  std::string name() const {
    std::string out;
    auto add = [&](bool on, const char* part) {
      if (!on) return;
      if (!out.empty()) out += '+';
      out += part;
    };
    add(use_ts, "ts");
    add(use_ap, "ap");
    add(use_hp, "hp");
    return out.empty() ? "none" : out;
  }

  /// Parses names like "ts+ap+hp" or "hp".
  static FeatureSchema parse(const std::string& text) {
    FeatureSchema s{false, false, false};
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('+', start);
      if (end == std::string::npos) end = text.size();
      std::string part = text.substr(start, end - start);
      if (part == "ts") s.use_ts = true;
      else if (part == "ap") s.use_ap = true;
      else if (part == "hp") s.use_hp = true;
      else throw ValidationError("unknown feature block '" + part + "' in schema '" + text + "'");
      start = end + 1;
    }
    if (!s.valid()) throw ValidationError("empty feature schema");
    return s;
  }

  bool operator==(const FeatureSchema&) const = default;
};

struct FeatureVector {
  std::vector<double> entries;
  std::vector<std::string> layout;
};

/// Observed values, then first differences, then second differences. Only the
/// differences that exist are emitted, so the length is
/// tau + max(tau-1, 0) + max(tau-2, 0).
inline std::vector<double> extract_ts_features(std::span<const double> observed, int horizon) {
  const int tau = static_cast<int>(observed.size());
  if (tau < 1 || tau >= horizon) {
    throw PreconditionError("observation length " + std::to_string(tau) + " outside [1, " +
                            std::to_string(horizon - 1) + "]");
  }
  std::vector<double> out(observed.begin(), observed.end());
  out.reserve(static_cast<std::size_t>(3 * tau));
  std::vector<double> first;
  for (int t = 1; t < tau; ++t) first.push_back(observed[t] - observed[t - 1]);
  out.insert(out.end(), first.begin(), first.end());
  for (std::size_t t = 1; t < first.size(); ++t) out.push_back(first[t] - first[t - 1]);
  return out;
}

inline std::vector<std::string> ts_layout(int tau) {
  std::vector<std::string> keys;
  for (int t = 1; t <= tau; ++t) keys.push_back("y" + std::to_string(t));
  for (int t = 2; t <= tau; ++t) keys.push_back("dy" + std::to_string(t));
  for (int t = 3; t <= tau; ++t) keys.push_back("ddy" + std::to_string(t));
  return keys;
}

/// Concatenates TS, AP and HP blocks (in that order) for one configuration.
/// `observed` must already be in normalized orientation when used for
/// training or prediction.
inline FeatureVector assemble_feature_vector(std::span<const double> observed, int horizon,
                                             const ConfigDescriptor& config,
                                             const FeatureSchema& schema,
                                             const FeatureKeys& keys) {
  if (!schema.valid()) throw PreconditionError("feature schema selects no block");
  const int tau = static_cast<int>(observed.size());
  if (tau < 1 || tau >= horizon) {
    throw PreconditionError("observation length " + std::to_string(tau) + " outside [1, " +
                            std::to_string(horizon - 1) + "]");
  }
  FeatureVector fv;
  if (schema.use_ts) {
    fv.entries = extract_ts_features(observed, horizon);
    fv.layout = ts_layout(tau);
  }
  auto append_block = [&](const std::map<std::string, double>& values,
                          const std::vector<std::string>& names, const char* block) {
    for (const auto& name : names) {
      auto it = values.find(name);
      if (it == values.end()) {
        throw ValidationError(std::string("configuration is missing ") + block + " key '" + name +
                              "'");
      }
      fv.entries.push_back(it->second);
      fv.layout.push_back(name);
    }
  };
  if (schema.use_ap) append_block(config.ap, keys.ap, "AP");
  if (schema.use_hp) append_block(config.hp, keys.hp, "HP");
  return fv;
}

inline FeatureVector assemble_feature_vector(std::span<const double> observed, int horizon,
                                             const ConfigDescriptor& config,
                                             const FeatureSchema& schema) {
  return assemble_feature_vector(observed, horizon, config, schema, FeatureKeys::of(config));
}

struct CurveRecord {
  ConfigDescriptor config;
  LearningCurve curve;

  const std::string& id() const { return curve.id; }
  bool operator==(const CurveRecord&) const = default;
};

/// A set of fully observed configurations sharing horizon, orientation and
/// key sets.
struct CurveDataset {
  MetricOrientation orientation;
  int horizon = 0;
  FeatureKeys keys;
  std::vector<CurveRecord> records;

  std::size_t size() const { return records.size(); }

  CurveDataset subset(std::span<const std::size_t> indices) const {
    CurveDataset out{orientation, horizon, keys, {}};
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(records.at(i));
    return out;
  }

  /// Final value in normalized orientation.
  double final_score(std::size_t i) const {
    return orientation.normalize(records.at(i).curve.final_value());
  }

  bool operator==(const CurveDataset&) const = default;
};

/// Throws ValidationError naming the first offending record.
inline void validate_dataset(const CurveDataset& ds) {
  if (ds.horizon < 2) throw ValidationError("dataset horizon must be at least 2");
  for (const auto& rec : ds.records) {
    const auto& c = rec.curve;
    if (c.horizon != ds.horizon) {
      throw ValidationError("record '" + c.id + "': horizon " + std::to_string(c.horizon) +
                            " differs from dataset horizon " + std::to_string(ds.horizon));
    }
    if (!c.complete()) {
      throw ValidationError("record '" + c.id + "': curve has " + std::to_string(c.values.size()) +
                            " of " + std::to_string(ds.horizon) + " epochs");
    }
    for (std::size_t t = 0; t < c.values.size(); ++t) {
      if (!value_in_range(c.values[t], ds.orientation)) {
        throw ValidationError("record '" + c.id + "': epoch " + std::to_string(t + 1) +
                              " value out of range for " + to_string(ds.orientation.direction));
      }
    }
    if (!ds.keys.matches(rec.config)) {
      throw ValidationError("record '" + c.id + "': AP/HP key set differs from the dataset's");
    }
  }
}

}  // namespace lcpred
