/*
 * Copyright 2026 The genimg-eval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <json.hpp>

#include <compare>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "genimg_eval/error.hpp"

namespace genimg_eval {

enum class Direction { kLowerBetter, kHigherBetter };

inline std::string to_string(Direction d) { return d == Direction::kLowerBetter ? "lower-better" : "higher-better"; }

inline Direction parse_direction(const std::string& s) {
  if (s == "lower-better") return Direction::kLowerBetter;
  if (s == "higher-better") return Direction::kHigherBetter;
  throw ValidationError("unknown metric direction '" + s + "' (expected lower-better or higher-better)");
}

// True when `a` is strictly better than `b` under `d`.
inline bool better(Direction d, double a, double b) { return d == Direction::kLowerBetter ? a < b : a > b; }

struct CellKey {
  std::string dataset;
  std::string augmentation;
  std::string metric;

  auto operator<=>(const CellKey&) const = default;
  bool operator==(const CellKey&) const = default;
};

// Scores keyed by (dataset, augmentation, metric) plus the preferred
// direction of every metric.
struct MetricTable {
  static constexpr int kSchemaVersion = 1;

  std::map<CellKey, double> cells;
  std::map<std::string, Direction> directions;

  void set(const std::string& dataset, const std::string& augmentation, const std::string& metric, double value) {
    cells[CellKey{dataset, augmentation, metric}] = value;
  }

  std::optional<double> get(const std::string& dataset, const std::string& augmentation,
                            const std::string& metric) const {
    auto it = cells.find(CellKey{dataset, augmentation, metric});
    if (it == cells.end()) return std::nullopt;
    return it->second;
  }

  Direction direction(const std::string& metric) const {
    auto it = directions.find(metric);
    if (it == directions.end()) throw ValidationError("no direction defined for metric '" + metric + "'");
    return it->second;
  }

  std::vector<std::string> datasets() const {
    std::set<std::string> s;
    for (const auto& [k, v] : cells) s.insert(k.dataset);
    return {s.begin(), s.end()};
  }

  std::vector<std::string> metrics() const {
    std::set<std::string> s;
    for (const auto& [k, v] : cells) s.insert(k.metric);
    return {s.begin(), s.end()};
  }

  std::vector<std::string> metrics(const std::string& dataset) const {
    std::set<std::string> s;
    for (const auto& [k, v] : cells)
      if (k.dataset == dataset) s.insert(k.metric);
    return {s.begin(), s.end()};
  }

  std::vector<std::string> augmentations(const std::string& dataset) const {
    std::set<std::string> s;
    for (const auto& [k, v] : cells)
      if (k.dataset == dataset) s.insert(k.augmentation);
    return {s.begin(), s.end()};
  }

  // (augmentation -> value) for one column of one dataset.
  std::map<std::string, double> column(const std::string& dataset, const std::string& metric) const {
    std::map<std::string, double> out;
    for (const auto& [k, v] : cells)
      if (k.dataset == dataset && k.metric == metric) out[k.augmentation] = v;
    return out;
  }

  void validate() const {
    for (const auto& [k, v] : cells) {
      if (!directions.contains(k.metric)) throw ValidationError("no direction defined for metric '" + k.metric + "'");
    }
  }

  // Adds every cell and direction of `other`; a cell present in both with a
  // different value, or a conflicting direction, is an error.
  void merge(const MetricTable& other) {
    for (const auto& [m, d] : other.directions) {
      auto [it, inserted] = directions.emplace(m, d);
      if (!inserted && it->second != d) throw ValidationError("conflicting directions for metric '" + m + "'");
    }
    for (const auto& [k, v] : other.cells) {
      auto [it, inserted] = cells.emplace(k, v);
      if (!inserted && it->second != v) {
        throw ValidationError("conflicting values for cell (" + k.dataset + ", " + k.augmentation + ", " + k.metric +
                              ")");
      }
    }
  }

  bool operator==(const MetricTable&) const = default;
};

inline nlohmann::json to_json(const MetricTable& t) {
  nlohmann::json j;
  j["schema_version"] = MetricTable::kSchemaVersion;
  j["directions"] = nlohmann::json::object();
  for (const auto& [m, d] : t.directions) j["directions"][m] = to_string(d);
  j["cells"] = nlohmann::json::array();
  for (const auto& [k, v] : t.cells) {
    j["cells"].push_back({{"dataset", k.dataset}, {"augmentation", k.augmentation}, {"metric", k.metric}, {"value", v}});
  }
  return j;
}

inline MetricTable metric_table_from_json(const nlohmann::json& j, const std::string& where = "metric table") {
  MetricTable t;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != MetricTable::kSchemaVersion) {
      throw ValidationError(where + ": unsupported schema_version " + std::to_string(version));
    }
    for (const auto& [m, d] : j.at("directions").items()) t.directions[m] = parse_direction(d.get<std::string>());
    std::size_t i = 0;
    for (const auto& c : j.at("cells")) {
      CellKey key{c.at("dataset").get<std::string>(), c.at("augmentation").get<std::string>(),
                  c.at("metric").get<std::string>()};
      if (!t.cells.emplace(key, c.at("value").get<double>()).second) {
        throw ValidationError(where + ": cells[" + std::to_string(i) + "] duplicates an earlier cell");
      }
      ++i;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  t.validate();
  return t;
}

inline MetricTable load_metric_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return metric_table_from_json(j, path);
}

// Directions of the statistics produced by VTT analysis.
inline std::map<std::string, Direction> default_human_directions() {
  return {{"fpr", Direction::kHigherBetter},
          {"fnr", Direction::kHigherBetter},
          {"t_test_p", Direction::kHigherBetter},
          {"likert_diff", Direction::kLowerBetter},
          {"ks_p", Direction::kHigherBetter}};
}

// Human-judgment CSV: header `dataset,augmentation,statistic_name,value`.
// Statistic names become metric ids; their directions come from
// `directions` (defaults cover the VTT statistics).
inline MetricTable parse_human_csv(std::istream& in, const std::string& where,
                                   std::map<std::string, Direction> directions = default_human_directions()) {
  MetricTable t;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    const std::string at = where + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (f != std::vector<std::string>{"dataset", "augmentation", "statistic_name", "value"}) {
        throw ValidationError(at + ": expected header dataset,augmentation,statistic_name,value");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 4) throw ValidationError(at + ": expected 4 fields, found " + std::to_string(f.size()));
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::exception&) {
      throw ValidationError(at + ": value is not a number: '" + f[3] + "'");
    }
    auto dir = directions.find(f[2]);
    if (dir == directions.end()) throw ValidationError(at + ": no direction known for statistic '" + f[2] + "'");
    t.directions[f[2]] = dir->second;
    if (!t.cells.emplace(CellKey{f[0], f[1], f[2]}, v).second) {
      throw ValidationError(at + ": duplicate (dataset, augmentation, statistic_name)");
    }
  }
  if (!header_seen) throw ValidationError(where + ": empty file");
  return t;
}

inline MetricTable load_human_csv(const std::string& path,
                                  std::map<std::string, Direction> directions = default_human_directions()) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_human_csv(in, path, std::move(directions));
}

}  // namespace genimg_eval
