// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcpred/common.hpp"
#include "lcpred/curve.hpp"
#include "lcpred/io/files.hpp"

namespace lcpred::io {

// Dataset JSONL: one record per line,
//   {"id":"cfg-00000","horizon":20,"orientation":"higher_is_better",
//    "ap":{"layers":4,"weights":12000},"hp":{"lr":0.01},"curve":[0.1,...]}
// CSV: header id,orientation,horizon,ap.<k>...,hp.<k>...,y1..yT with AP and
// HP columns in lexicographic key order.

enum class DatasetFormat { jsonl, csv };

inline DatasetFormat parse_format(const std::string& s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "csv") return DatasetFormat::csv;
  throw ValidationError("unknown dataset format '" + s + "'");
}

inline DatasetFormat format_for_path(const std::filesystem::path& p) {
  return p.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string line_error(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

// Shared checks once a record is parsed: the first record fixes horizon,
// orientation and key sets.
inline void accept_record(CurveDataset& ds, CurveRecord rec, int horizon, Orientation o, std::size_t line) {
  const std::string& id = rec.id();
  if (ds.records.empty()) {
    ds.horizon = horizon;
    ds.orientation.direction = o;
    ds.keys = FeatureKeys::of(rec.config);
  } else {
    if (horizon != ds.horizon)
      throw ValidationError(line_error(line, "record '" + id + "' has horizon " + std::to_string(horizon) +
                                                 ", expected " + std::to_string(ds.horizon)));
    if (o != ds.orientation.direction)
      throw ValidationError(line_error(line, "record '" + id + "' has a different orientation"));
    if (!ds.keys.matches(rec.config))
      throw ValidationError(line_error(line, "record '" + id + "' has a different AP/HP key set"));
  }
  if (horizon < 2) throw ValidationError(line_error(line, "record '" + id + "' has horizon below 2"));
  if (static_cast<int>(rec.curve.values.size()) != horizon)
    throw ValidationError(line_error(line, "record '" + id + "' has " + std::to_string(rec.curve.values.size()) +
                                               " of " + std::to_string(horizon) + " epochs"));
  for (std::size_t t = 0; t < rec.curve.values.size(); ++t)
    if (!value_in_range(rec.curve.values[t], ds.orientation))
      throw ValidationError(line_error(line, "record '" + id + "' epoch " + std::to_string(t + 1) + " is out of range"));
  rec.curve.horizon = horizon;
  ds.records.push_back(std::move(rec));
}

inline double parse_number(const std::string& s, std::size_t line, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ValidationError(line_error(line, "bad number '" + s + "' in " + what));
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') { out.push_back(cur); cur.clear(); }
    else if (c != '\r') cur.push_back(c);
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string to_jsonl(const CurveDataset& ds) {
  std::string out;
  for (const auto& rec : ds.records) {
    nlohmann::json j;
    j["id"] = rec.id();
    j["horizon"] = ds.horizon;
    j["orientation"] = to_string(ds.orientation.direction);
    j["ap"] = rec.config.ap;
    j["hp"] = rec.config.hp;
    j["curve"] = rec.curve.values;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline CurveDataset parse_jsonl(const std::string& text) {
  CurveDataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(detail::line_error(lineno, std::string("malformed JSON: ") + e.what()));
    }
    CurveRecord rec;
    int horizon = 0;
    Orientation o{};
    try {
      rec.curve.id = j.at("id").get<std::string>();
      horizon = j.at("horizon").get<int>();
      o = parse_orientation(j.at("orientation").get<std::string>());
      rec.config.ap = j.at("ap").get<std::map<std::string, double>>();
      rec.config.hp = j.value("hp", nlohmann::json::object()).get<std::map<std::string, double>>();
      rec.curve.values = j.at("curve").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      const std::string id = rec.curve.id.empty() ? "" : " '" + rec.curve.id + "'";
      throw ValidationError(detail::line_error(lineno, "record" + id + ": " + e.what()));
    }
    detail::accept_record(ds, std::move(rec), horizon, o, lineno);
  }
  if (ds.records.empty()) throw ValidationError("dataset contains no records");
  return ds;
}

inline std::string to_csv(const CurveDataset& ds) {
  std::string out = "id,orientation,horizon";
  for (const auto& k : ds.keys.ap) out += ",ap." + k;
  for (const auto& k : ds.keys.hp) out += ",hp." + k;
  for (int t = 1; t <= ds.horizon; ++t) out += ",y" + std::to_string(t);
  out += '\n';
  for (const auto& rec : ds.records) {
    if (rec.id().find_first_of(",\"\n\r") != std::string::npos)
      throw ValidationError("record id '" + rec.id() + "' cannot be written to CSV");
    out += rec.id() + "," + to_string(ds.orientation.direction) + "," + std::to_string(ds.horizon);
    for (const auto& k : ds.keys.ap) out += "," + format_double(rec.config.ap.at(k));
    for (const auto& k : ds.keys.hp) out += "," + format_double(rec.config.hp.at(k));
    for (double v : rec.curve.values) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

inline CurveDataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV dataset is empty");
  const auto header = detail::split_csv(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "orientation" || header[2] != "horizon")
    throw ValidationError(detail::line_error(1, "CSV header must start with id,orientation,horizon"));
  std::vector<std::string> ap, hp;
  std::size_t col = 3;
  for (; col < header.size() && header[col].rfind("ap.", 0) == 0; ++col) ap.push_back(header[col].substr(3));
  for (; col < header.size() && header[col].rfind("hp.", 0) == 0; ++col) hp.push_back(header[col].substr(3));
  const std::size_t first_y = col;
  for (std::size_t c = first_y; c < header.size(); ++c)
    if (header[c] != "y" + std::to_string(c - first_y + 1))
      throw ValidationError(detail::line_error(1, "unexpected CSV column '" + header[c] + "'"));
  const int width = static_cast<int>(header.size() - first_y);

  CurveDataset ds;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv(line);
    CurveRecord rec;
    rec.curve.id = cells[0];
    if (cells.size() < first_y)
      throw ValidationError(detail::line_error(lineno, "record '" + rec.curve.id + "' has too few columns"));
    const Orientation o = parse_orientation(cells[1]);
    const int horizon = static_cast<int>(detail::parse_number(cells[2], lineno, "horizon"));
    if (horizon != width)
      throw ValidationError(detail::line_error(lineno, "record '" + rec.curve.id + "' declares horizon " +
                                                           std::to_string(horizon) + " but the header has " +
                                                           std::to_string(width) + " epoch columns"));
    for (std::size_t k = 0; k < ap.size(); ++k)
      rec.config.ap[ap[k]] = detail::parse_number(cells[3 + k], lineno, "ap." + ap[k]);
    for (std::size_t k = 0; k < hp.size(); ++k)
      rec.config.hp[hp[k]] = detail::parse_number(cells[3 + ap.size() + k], lineno, "hp." + hp[k]);
    for (std::size_t c = first_y; c < cells.size(); ++c) {
      if (cells[c].empty()) break;  // short curve; reported by accept_record
      rec.curve.values.push_back(detail::parse_number(cells[c], lineno, "y" + std::to_string(c - first_y + 1)));
    }
    detail::accept_record(ds, std::move(rec), horizon, o, lineno);
  }
  if (ds.records.empty()) throw ValidationError("dataset contains no records");
  return ds;
}

inline CurveDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const std::string text = read_file(path);
  return format == DatasetFormat::csv ? parse_csv(text) : parse_jsonl(text);
}

inline CurveDataset load_dataset(const std::filesystem::path& path) { return load_dataset(path, format_for_path(path)); }

inline void save_dataset(const CurveDataset& ds, const std::filesystem::path& path, DatasetFormat format) {
  write_file_atomic(path, format == DatasetFormat::csv ? to_csv(ds) : to_jsonl(ds));
}

inline void save_dataset(const CurveDataset& ds, const std::filesystem::path& path) {
  save_dataset(ds, path, format_for_path(path));
}

/// FNV-1a over the canonical JSONL encoding.
inline std::uint64_t dataset_checksum(const CurveDataset& ds) { return fnv1a(to_jsonl(ds)); }

}  // namespace lcpred::io
