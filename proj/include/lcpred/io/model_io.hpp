// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lcpred/common.hpp"
#include "lcpred/io/files.hpp"
#include "lcpred/srm.hpp"

namespace lcpred::io {

// SRM document:
//   {"format":"lcpred.srm","version":1,"horizon":T,"orientation":...,
//    "schema":{"ts":true,"ap":true,"hp":true},"keys":{"ap":[...],"hp":[...]},
//    "sigma_floor":1e-06,"models":[{"tau":1,"sigma":...,"regressor":{...}},...]}
// Doubles are written in shortest round-trip form, so a reload predicts
// bit-identically.

inline constexpr int kModelVersion = 1;
inline constexpr const char* kModelFormat = "lcpred.srm";

using nlohmann::json;

namespace detail {

inline json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Eigen::MatrixXd to_mat(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != m.rows()) throw ValidationError("matrix row count mismatch");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto row = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != m.cols()) throw ValidationError("matrix column count mismatch");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

inline json kernel_json(const Kernel& k) { return {{"type", to_string(k.type)}, {"gamma", k.gamma}}; }
inline Kernel to_kernel(const json& j) {
  return {parse_kernel_type(j.at("type").get<std::string>()), j.at("gamma").get<double>()};
}

}  // namespace detail

inline json regressor_to_json(const TrainedRegressor& r) {
  json j;
  j["backend"] = to_string(r.spec.backend);
  j["hyperparams"] = r.spec.hyperparams;
  j["scaler"] = {{"mean", detail::vec(r.scaler.mean)}, {"stddev", detail::vec(r.scaler.stddev)}};
  json m;
  if (const auto* s = std::get_if<NuSvrModel>(&r.model)) {
    m = {{"kind", "nu_svr"}, {"kernel", detail::kernel_json(s->kernel)}, {"bias", s->bias},
         {"weights", detail::vec(s->weights)}, {"coef", detail::vec(s->coef)}, {"support", detail::mat(s->support)}};
  } else if (const auto* o = std::get_if<KernelOlsModel>(&r.model)) {
    m = {{"kind", "kernel_ols"}, {"kernel", detail::kernel_json(o->kernel)}, {"offset", o->offset},
         {"weights", detail::vec(o->weights)}, {"points", detail::mat(o->points)}};
  } else if (const auto* f = std::get_if<RandomForestModel>(&r.model)) {
    json trees = json::array();
    for (const auto& t : f->trees) {
      json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
           value = json::array();
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
    }
    m = {{"kind", "random_forest"}, {"trees", trees}};
  } else {
    m = {{"kind", "last_seen"}, {"slot", std::get<LastSeenModel>(r.model).slot}};
  }
  j["model"] = m;
  return j;
}

inline TrainedRegressor regressor_from_json(const json& j) {
  TrainedRegressor r;
  r.spec.backend = parse_backend(j.at("backend").get<std::string>());
  r.spec.hyperparams = j.at("hyperparams").get<std::map<std::string, double>>();
  r.spec.validate();
  r.scaler.mean = detail::to_vec(j.at("scaler").at("mean"));
  r.scaler.stddev = detail::to_vec(j.at("scaler").at("stddev"));
  if (r.scaler.mean.size() != r.scaler.stddev.size()) throw ValidationError("scaler vectors differ in length");
  const json& m = j.at("model");
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "nu_svr") {
    NuSvrModel s;
    s.kernel = detail::to_kernel(m.at("kernel"));
    s.bias = m.at("bias").get<double>();
    s.weights = detail::to_vec(m.at("weights"));
    s.coef = detail::to_vec(m.at("coef"));
    s.support = detail::to_mat(m.at("support"));
    if (s.coef.size() != s.support.rows()) throw ValidationError("support vector count mismatch");
    r.model = std::move(s);
  } else if (kind == "kernel_ols") {
    KernelOlsModel o;
    o.kernel = detail::to_kernel(m.at("kernel"));
    o.offset = m.at("offset").get<double>();
    o.weights = detail::to_vec(m.at("weights"));
    o.points = detail::to_mat(m.at("points"));
    if (o.weights.size() != o.points.rows()) throw ValidationError("kernel OLS weight count mismatch");
    r.model = std::move(o);
  } else if (kind == "random_forest") {
    RandomForestModel f;
    for (const auto& t : m.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const std::size_t n = feature.size();
      if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
        throw ValidationError("malformed tree");
      RegressionTree tree;
      for (std::size_t i = 0; i < n; ++i) {
        const bool leaf = feature[i] < 0;
        const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
        if (!leaf && (!in_range(left[i]) || !in_range(right[i]))) throw ValidationError("tree child index out of range");
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
      }
      f.trees.push_back(std::move(tree));
    }
    if (f.trees.empty()) throw ValidationError("forest has no trees");
    r.model = std::move(f);
  } else if (kind == "last_seen") {
    r.model = LastSeenModel{m.at("slot").get<Eigen::Index>()};
  } else {
    throw ValidationError("unknown model kind '" + kind + "'");
  }
  return r;
}

inline json srm_to_json(const SequentialRegressionModel& srm) {
  json models = json::array();
  for (const auto& [tau, reg] : srm.models)
    models.push_back({{"tau", tau}, {"sigma", srm.sigma.at(tau)}, {"regressor", regressor_to_json(reg)}});
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"horizon", srm.horizon},
          {"orientation", to_string(srm.orientation.direction)},
          {"schema", {{"ts", srm.schema.use_ts}, {"ap", srm.schema.use_ap}, {"hp", srm.schema.use_hp}}},
          {"keys", {{"ap", srm.keys.ap}, {"hp", srm.keys.hp}}},
          {"sigma_floor", srm.sigma_floor},
          {"models", models}};
}

inline SequentialRegressionModel srm_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw ValidationError("not an SRM document");
    const int version = j.at("version").get<int>();
    if (version != kModelVersion)
      throw VersionError("SRM document version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kModelVersion) + ")");
    SequentialRegressionModel srm;
    srm.horizon = j.at("horizon").get<int>();
    srm.orientation.direction = parse_orientation(j.at("orientation").get<std::string>());
    const json& s = j.at("schema");
    srm.schema = {s.at("ts").get<bool>(), s.at("ap").get<bool>(), s.at("hp").get<bool>()};
    srm.keys.ap = j.at("keys").at("ap").get<std::vector<std::string>>();
    srm.keys.hp = j.at("keys").at("hp").get<std::vector<std::string>>();
    srm.sigma_floor = j.at("sigma_floor").get<double>();
    for (const auto& m : j.at("models")) {
      const int tau = m.at("tau").get<int>();
      if (tau < 1 || tau >= srm.horizon) throw ValidationError("model tau " + std::to_string(tau) + " out of range");
      const double sigma = m.at("sigma").get<double>();
      if (!(sigma >= srm.sigma_floor)) throw ValidationError("sigma below floor at tau " + std::to_string(tau));
      srm.models.emplace(tau, regressor_from_json(m.at("regressor")));
      srm.sigma.emplace(tau, sigma);
    }
    return srm;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed SRM document: ") + e.what());
  }
}

inline void save_model(const SequentialRegressionModel& srm, const std::filesystem::path& path) {
  write_file_atomic(path, srm_to_json(srm).dump() + "\n");
}

inline SequentialRegressionModel load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse model '" + path.string() + "': " + e.what());
  }
  return srm_from_json(j);
}

}  // namespace lcpred::io
