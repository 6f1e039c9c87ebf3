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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/metric_table.hpp"
#include "genimg_eval/stat_tests.hpp"
#include "genimg_eval/vtt_analysis.hpp"

namespace genimg_eval {

// Augmentation labels of one (dataset, metric) column, best first.
struct Ranking {
  std::string dataset;
  std::string metric;
  std::vector<std::string> order;
  std::vector<std::vector<std::string>> ties;  // groups of exactly equal values

  // Tier of each label: equal for tied labels, increasing down the order.
  std::map<std::string, int> tiers() const {
    std::map<std::string, int> group_of;
    for (std::size_t g = 0; g < ties.size(); ++g)
      for (const auto& l : ties[g]) group_of[l] = static_cast<int>(g);
    std::map<std::string, int> out;
    int tier = -1;
    int prev_group = -1;
    for (const auto& l : order) {
      auto it = group_of.find(l);
      const int g = it == group_of.end() ? -1 : it->second;
      if (g < 0 || g != prev_group) ++tier;
      prev_group = g;
      out[l] = tier;
    }
    return out;
  }

  bool operator==(const Ranking&) const = default;
};

inline Ranking rank(const MetricTable& table, const std::string& dataset, const std::string& metric) {
  const Direction dir = table.direction(metric);
  const auto column = table.column(dataset, metric);
  if (column.empty()) throw ValidationError("no values for (" + dataset + ", " + metric + ")");

  std::vector<std::pair<std::string, double>> items(column.begin(), column.end());
  // `column` is label-sorted, so a stable sort leaves exact ties in
  // lexicographic order.
  std::stable_sort(items.begin(), items.end(),
                   [&](const auto& a, const auto& b) { return better(dir, a.second, b.second); });
  Ranking r{dataset, metric, {}, {}};
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i + 1;
    while (j < items.size() && items[j].second == items[i].second) ++j;
    if (j - i > 1) {
      std::vector<std::string> group;
      for (std::size_t k = i; k < j; ++k) group.push_back(items[k].first);
      r.ties.push_back(std::move(group));
    }
    for (std::size_t k = i; k < j; ++k) r.order.push_back(items[k].first);
    i = j;
  }
  return r;
}

// Kendall tau-b between two rankings of the same labels.
inline double kendall_tau(const Ranking& a, const Ranking& b) {
  const auto ta = a.tiers();
  const auto tb = b.tiers();
  std::set<std::string> la, lb;
  for (const auto& [l, t] : ta) la.insert(l);
  for (const auto& [l, t] : tb) lb.insert(l);
  if (la != lb) throw ValidationError("kendall_tau: rankings cover different labels");

  const std::vector<std::string> labels(la.begin(), la.end());
  long long concordant = 0, discordant = 0, tied_a = 0, tied_b = 0, pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      ++pairs;
      const int da = ta.at(labels[i]) - ta.at(labels[j]);
      const int db = tb.at(labels[i]) - tb.at(labels[j]);
      if (da == 0) ++tied_a;
      if (db == 0) ++tied_b;
      if (da == 0 || db == 0) continue;
      ((da > 0) == (db > 0) ? concordant : discordant) += 1;
    }
  }
  const double denom = std::sqrt(static_cast<double>(pairs - tied_a) * static_cast<double>(pairs - tied_b));
  if (denom == 0.0) return ta == tb ? 1.0 : 0.0;
  return static_cast<double>(concordant - discordant) / denom;
}

using MetricPair = std::pair<std::string, std::string>;  // first < second

struct ConsistencyReport {
  std::map<std::string, std::map<MetricPair, double>> per_dataset;
  std::map<MetricPair, double> pairs;          // mean over datasets
  std::map<std::string, double> dataset_mean;  // mean over metric pairs
  std::optional<double> overall;               // mean over all (dataset, pair)

  double tau(const std::string& a, const std::string& b) const {
    if (a == b) return 1.0;
    return pairs.at(a < b ? MetricPair{a, b} : MetricPair{b, a});
  }

  bool empty() const { return per_dataset.empty(); }
  bool operator==(const ConsistencyReport&) const = default;
};

// Kendall tau-b for every pair of metrics ranked on the same label set
// within a dataset.
inline ConsistencyReport consistency(const MetricTable& table) {
  ConsistencyReport c;
  std::map<MetricPair, std::pair<double, int>> pair_acc;
  double all_sum = 0.0;
  int all_count = 0;
  for (const auto& ds : table.datasets()) {
    const auto metrics = table.metrics(ds);
    std::map<std::string, Ranking> ranked;
    for (const auto& m : metrics) ranked.emplace(m, rank(table, ds, m));
    double ds_sum = 0.0;
    int ds_count = 0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      for (std::size_t j = i + 1; j < metrics.size(); ++j) {
        const auto& ra = ranked.at(metrics[i]);
        const auto& rb = ranked.at(metrics[j]);
        std::set<std::string> la(ra.order.begin(), ra.order.end()), lb(rb.order.begin(), rb.order.end());
        if (la != lb || la.size() < 2) continue;
        const double tau = kendall_tau(ra, rb);
        const MetricPair key{metrics[i], metrics[j]};
        c.per_dataset[ds][key] = tau;
        auto& acc = pair_acc[key];
        acc.first += tau;
        acc.second += 1;
        ds_sum += tau;
        ++ds_count;
      }
    }
    if (ds_count > 0) c.dataset_mean[ds] = ds_sum / ds_count;
    all_sum += ds_sum;
    all_count += ds_count;
  }
  for (const auto& [k, acc] : pair_acc) c.pairs[k] = acc.first / acc.second;
  if (all_count > 0) c.overall = all_sum / all_count;
  return c;
}

// Cells strictly worse than the same (dataset, metric) baseline value.
inline std::map<CellKey, bool> dagger_marks(const MetricTable& table, const std::string& baseline = "None") {
  std::map<CellKey, bool> marks;
  for (const auto& [key, value] : table.cells) {
    auto base = table.get(key.dataset, baseline, key.metric);
    if (!base) {
      throw ValidationError("dagger_marks: no '" + baseline + "' row for (" + key.dataset + ", " + key.metric + ")");
    }
    marks[key] = key.augmentation != baseline && better(table.direction(key.metric), *base, value);
  }
  return marks;
}

// Cells holding the best value of their (dataset, metric) column.
inline std::set<CellKey> best_cells(const MetricTable& table) {
  std::map<std::pair<std::string, std::string>, double> best;
  for (const auto& [key, value] : table.cells) {
    auto [it, inserted] = best.emplace(std::make_pair(key.dataset, key.metric), value);
    if (!inserted && better(table.direction(key.metric), value, it->second)) it->second = value;
  }
  std::set<CellKey> out;
  for (const auto& [key, value] : table.cells)
    if (value == best.at({key.dataset, key.metric})) out.insert(key);
  return out;
}

using HumanKey = std::pair<std::string, std::string>;  // (dataset, augmentation)

// Pearson correlation between one metric and a human statistic over their
// shared (dataset, augmentation) keys.
inline CorrelationResult correlate_with_humans(const MetricTable& table, const std::string& metric,
                                               const std::map<HumanKey, double>& human, double alpha = 0.05) {
  std::vector<double> x, y;
  for (const auto& [key, value] : table.cells) {
    if (key.metric != metric) continue;
    auto it = human.find({key.dataset, key.augmentation});
    if (it == human.end()) continue;
    x.push_back(value);
    y.push_back(it->second);
  }
  if (x.size() < 3) {
    throw ValidationError("correlate_with_humans: only " + std::to_string(x.size()) + " overlapping (dataset, "
                          "augmentation) keys for metric '" + metric + "', need at least 3");
  }
  return pearson(x, y, alpha);
}

inline std::map<HumanKey, double> human_statistic(const MetricTable& human, const std::string& statistic) {
  std::map<HumanKey, double> out;
  for (const auto& [key, value] : human.cells)
    if (key.metric == statistic) out[{key.dataset, key.augmentation}] = value;
  return out;
}

// Provenance recorded in every output document.
struct RunInfo {
  std::string tool_version = kToolVersion;
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, double> alphas;
  std::string t_test_variant = "pooled";
  std::string pairing = "none";

  bool operator==(const RunInfo&) const = default;
};

struct ReportTable {
  std::string title;
  MetricTable table;

  bool operator==(const ReportTable&) const = default;
};

struct NamedCorrelation {
  std::string metric;
  std::string human_statistic;
  CorrelationResult result;

  bool operator==(const NamedCorrelation&) const = default;
};

// Paired t-test of one augmentation against a baseline over matched cells.
struct BenchmarkEntry {
  std::string augmentation;
  std::string baseline;
  std::string metrics;  // metric id, or the selector pooled across
  std::string pairing;  // by-dataset | by-dataset-extractor
  std::size_t n_pairs = 0;
  TestResult test;

  bool operator==(const BenchmarkEntry&) const = default;
};

struct Report {
  static constexpr int kSchemaVersion = 1;

  RunInfo run;
  std::string baseline = "None";
  std::vector<ReportTable> tables;
  std::vector<Ranking> rankings;
  std::optional<ConsistencyReport> consistency;
  std::vector<VttStats> vtt;
  std::vector<NamedCorrelation> correlations;
  std::vector<BenchmarkEntry> benchmarks;

  bool operator==(const Report&) const = default;
};

inline void to_json(nlohmann::json& j, const RunInfo& r) {
  j = nlohmann::json{{"tool_version", r.tool_version}, {"command", r.command},
                     {"seed", r.seed},                 {"alphas", r.alphas},
                     {"t_test_variant", r.t_test_variant}, {"pairing", r.pairing}};
}

inline void from_json(const nlohmann::json& j, RunInfo& r) {
  r.tool_version = j.at("tool_version").get<std::string>();
  r.command = j.at("command").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.alphas = j.at("alphas").get<std::map<std::string, double>>();
  r.t_test_variant = j.at("t_test_variant").get<std::string>();
  r.pairing = j.at("pairing").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Ranking& r) {
  j = nlohmann::json{{"dataset", r.dataset}, {"metric", r.metric}, {"order", r.order}, {"ties", r.ties}};
}

inline void from_json(const nlohmann::json& j, Ranking& r) {
  r.dataset = j.at("dataset").get<std::string>();
  r.metric = j.at("metric").get<std::string>();
  r.order = j.at("order").get<std::vector<std::string>>();
  r.ties = j.at("ties").get<std::vector<std::vector<std::string>>>();
}

inline void to_json(nlohmann::json& j, const ConsistencyReport& c) {
  auto pairs_json = [](const std::map<MetricPair, double>& m) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [k, v] : m) a.push_back({{"metric_a", k.first}, {"metric_b", k.second}, {"tau", v}});
    return a;
  };
  j = nlohmann::json::object();
  j["per_dataset"] = nlohmann::json::object();
  for (const auto& [ds, m] : c.per_dataset) j["per_dataset"][ds] = pairs_json(m);
  j["pairs"] = pairs_json(c.pairs);
  j["dataset_mean"] = c.dataset_mean;
  j["overall"] = c.overall ? nlohmann::json(*c.overall) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ConsistencyReport& c) {
  auto read_pairs = [](const nlohmann::json& a) {
    std::map<MetricPair, double> m;
    for (const auto& e : a) m[{e.at("metric_a").get<std::string>(), e.at("metric_b").get<std::string>()}] = e.at("tau").get<double>();
    return m;
  };
  c.per_dataset.clear();
  for (const auto& [ds, a] : j.at("per_dataset").items()) c.per_dataset[ds] = read_pairs(a);
  c.pairs = read_pairs(j.at("pairs"));
  c.dataset_mean = j.at("dataset_mean").get<std::map<std::string, double>>();
  c.overall = j.at("overall").is_null() ? std::nullopt : std::optional<double>(j.at("overall").get<double>());
}

inline void to_json(nlohmann::json& j, const NamedCorrelation& c) {
  j = nlohmann::json{{"metric", c.metric}, {"human_statistic", c.human_statistic}, {"result", c.result}};
}

inline void from_json(const nlohmann::json& j, NamedCorrelation& c) {
  c.metric = j.at("metric").get<std::string>();
  c.human_statistic = j.at("human_statistic").get<std::string>();
  c.result = j.at("result").get<CorrelationResult>();
}

inline void to_json(nlohmann::json& j, const BenchmarkEntry& b) {
  j = nlohmann::json{{"augmentation", b.augmentation}, {"baseline", b.baseline}, {"metrics", b.metrics},
                     {"pairing", b.pairing},           {"n_pairs", b.n_pairs},   {"test", b.test}};
}

inline void from_json(const nlohmann::json& j, BenchmarkEntry& b) {
  b.augmentation = j.at("augmentation").get<std::string>();
  b.baseline = j.at("baseline").get<std::string>();
  b.metrics = j.at("metrics").get<std::string>();
  b.pairing = j.at("pairing").get<std::string>();
  b.n_pairs = j.at("n_pairs").get<std::size_t>();
  b.test = j.at("test").get<TestResult>();
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j;
  j["schema_version"] = Report::kSchemaVersion;
  j["run"] = r.run;
  j["baseline"] = r.baseline;
  j["tables"] = nlohmann::json::array();
  for (const auto& t : r.tables) j["tables"].push_back({{"title", t.title}, {"table", to_json(t.table)}});
  j["rankings"] = r.rankings;
  j["consistency"] = r.consistency ? nlohmann::json(*r.consistency) : nlohmann::json(nullptr);
  j["vtt"] = r.vtt;
  j["correlations"] = r.correlations;
  j["benchmarks"] = r.benchmarks;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    if (j.at("schema_version").get<int>() != Report::kSchemaVersion) {
      throw ValidationError("unsupported report schema_version");
    }
    r.run = j.at("run").get<RunInfo>();
    r.baseline = j.at("baseline").get<std::string>();
    for (const auto& t : j.at("tables"))
      r.tables.push_back({t.at("title").get<std::string>(), metric_table_from_json(t.at("table"))});
    r.rankings = j.at("rankings").get<std::vector<Ranking>>();
    if (!j.at("consistency").is_null()) r.consistency = j.at("consistency").get<ConsistencyReport>();
    r.vtt = j.at("vtt").get<std::vector<VttStats>>();
    r.correlations = j.at("correlations").get<std::vector<NamedCorrelation>>();
    r.benchmarks = j.at("benchmarks").get<std::vector<BenchmarkEntry>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
  return r;
}

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// "p=.497", "p<.001", "p>.999".
inline std::string format_p(double p) {
  if (p < 0.001) return "p<.001";
  if (p > 0.999) return "p>.999";
  std::string s = fixed(p, 3);
  if (s.starts_with("0")) s.erase(0, 1);
  return "p=" + s;
}

inline const char* arrow(Direction d) { return d == Direction::kLowerBetter ? "↓" : "↑"; }

// Baseline first, the rest lexicographic.
inline std::vector<std::string> row_order(std::vector<std::string> labels, const std::string& baseline) {
  std::stable_partition(labels.begin(), labels.end(), [&](const std::string& l) { return l == baseline; });
  return labels;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

inline std::string ranking_text(const Ranking& r) {
  const auto tiers = r.tiers();
  std::string out;
  for (std::size_t i = 0; i < r.order.size(); ++i) {
    if (i > 0) out += tiers.at(r.order[i]) == tiers.at(r.order[i - 1]) ? " = " : " > ";
    out += r.order[i];
  }
  return out;
}

inline void markdown_table(std::ostream& out, const ReportTable& rt, const std::string& baseline) {
  const auto& t = rt.table;
  out << "## " << rt.title << "\n\n";
  const auto metrics = t.metrics();
  out << "| Dataset | Aug |";
  for (const auto& m : metrics) out << ' ' << m << ' ' << arrow(t.direction(m)) << " |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) out << "---:|";
  out << '\n';

  const auto best = best_cells(t);
  for (const auto& ds : t.datasets()) {
    const auto augs = row_order(t.augmentations(ds), baseline);
    const bool has_baseline = std::find(augs.begin(), augs.end(), baseline) != augs.end();
    bool first = true;
    for (const auto& aug : augs) {
      out << "| " << (first ? ds : "") << " | " << aug << " |";
      first = false;
      for (const auto& m : metrics) {
        const auto v = t.get(ds, aug, m);
        if (!v) {
          out << " n/a |";
          continue;
        }
        const CellKey key{ds, aug, m};
        std::string cell = fixed(*v);
        if (best.contains(key)) cell = "**" + cell + "**";
        const auto base = has_baseline ? t.get(ds, baseline, m) : std::nullopt;
        if (base && aug != baseline && better(t.direction(m), *base, *v)) cell += "†";
        out << ' ' << cell << " |";
      }
      out << '\n';
    }
  }
  out << "\nBold marks the best value per dataset; † marks a value worse than " << baseline << ".\n\n";
}

}  // namespace detail

enum class ReportFormat { kMarkdown, kJson };

inline std::string emit_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::kJson) return report_to_json(r).dump(2) + "\n";

  std::ostringstream out;
  out << "# Generative model evaluation report\n\n";
  out << "- tool version: " << r.run.tool_version << "\n";
  if (!r.run.command.empty()) out << "- command: " << r.run.command << "\n";
  out << "- seed: " << r.run.seed << "\n";
  for (const auto& [name, a] : r.run.alphas) out << "- alpha " << name << ": " << a << "\n";
  out << "- t-test variant: " << r.run.t_test_variant << "\n";
  out << "- pairing: " << r.run.pairing << "\n\n";

  for (const auto& t : r.tables) detail::markdown_table(out, t, r.baseline);

  if (!r.vtt.empty()) {
    out << "## Visual Turing tests\n\n";
    out << "| Study | FPR [%] ↑ | FNR [%] ↑ | t test | Diff ↓ | KS test |\n|---|---:|---:|---:|---:|---:|\n";
    for (const auto& s : r.vtt) {
      out << "| " << s.study_id << " | " << detail::fixed(s.fpr, 0) << " | " << detail::fixed(s.fnr, 0) << " | "
          << (s.group_test ? detail::format_p(s.group_test->p_value) : std::string("n/a")) << " | " << detail::fixed(s.likert_diff) << " | "
          << detail::format_p(s.ks_test.p_value) << " |\n";
    }
    out << "\n";
  }

  if (!r.rankings.empty()) {
    out << "## Rankings\n\n| Dataset | Metric | Order (best first) |\n|---|---|---|\n";
    for (const auto& rk : r.rankings)
      out << "| " << rk.dataset << " | " << rk.metric << " | " << detail::ranking_text(rk) << " |\n";
    out << "\n";
  }

  if (r.consistency) {
    out << "## Ranking consistency (Kendall tau-b)\n\n";
    if (r.consistency->empty()) {
      out << "No metric pairs to compare.\n\n";
    } else {
      out << "| Dataset | Metric A | Metric B | tau |\n|---|---|---|---:|\n";
      for (const auto& [ds, pairs] : r.consistency->per_dataset)
        for (const auto& [k, tau] : pairs)
          out << "| " << ds << " | " << k.first << " | " << k.second << " | " << detail::fixed(tau, 3) << " |\n";
      out << "\n";
      for (const auto& [ds, m] : r.consistency->dataset_mean)
        out << "- mean tau, " << ds << ": " << detail::fixed(m, 3) << "\n";
      if (r.consistency->overall) out << "- mean tau, overall: " << detail::fixed(*r.consistency->overall, 3) << "\n";
      out << "\n";
    }
  }

  if (!r.correlations.empty()) {
    out << "## Correlation with human judgment\n\n| Metric | Human statistic | n | r | p | reject |\n"
           "|---|---|---:|---:|---:|---|\n";
    for (const auto& c : r.correlations) {
      out << "| " << c.metric << " | " << c.human_statistic << " | " << c.result.n << " | "
          << detail::fixed(c.result.r, 3) << " | " << detail::format_p(c.result.p_value) << " | "
          << (c.result.reject ? "yes" : "no") << " (alpha=" << c.result.alpha << ") |\n";
    }
    out << "\n";
  }

  if (!r.benchmarks.empty()) {
    out << "## Augmentation benchmarks (paired t-tests)\n\n"
           "| Augmentation | Baseline | Metrics | Pairing | Pairs | t | p | alternative | reject |\n"
           "|---|---|---|---|---:|---:|---:|---|---|\n";
    for (const auto& b : r.benchmarks) {
      out << "| " << b.augmentation << " | " << b.baseline << " | " << b.metrics << " | " << b.pairing << " | "
          << b.n_pairs << " | " << detail::fixed(b.test.statistic, 3) << " | " << detail::format_p(b.test.p_value)
          << " | " << to_string(b.test.alternative) << " | " << (b.test.reject ? "yes" : "no")
          << (b.test.degenerate ? " (degenerate)" : "") << " |\n";
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace genimg_eval
