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

// Command implementations behind the genimg_eval tool. Each command builds
// its documents in memory; write_outputs serializes them.

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/gaussian_frechet.hpp"
#include "genimg_eval/metric_table.hpp"
#include "genimg_eval/ranking_report.hpp"
#include "genimg_eval/stat_tests.hpp"
#include "genimg_eval/vtt_analysis.hpp"

namespace genimg_eval::cli {

struct OutputOptions {
  std::optional<std::string> out;  // file stem; stdout when absent
  std::string format = "both";     // json | markdown | both
  std::uint64_t seed = 0;
};

struct CommandOutput {
  nlohmann::json json;
  std::string markdown;
};

inline void check_format(const std::string& f) {
  if (f != "json" && f != "markdown" && f != "both") {
    throw ValidationError("--format must be json, markdown or both, got '" + f + "'");
  }
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("write to " + path + " failed");
}

// Writes <stem>.json and/or <stem>.md; without a stem, prints one document
// (markdown unless json was asked for).
inline void write_outputs(const CommandOutput& doc, const OutputOptions& opts, std::ostream& stdout_stream) {
  check_format(opts.format);
  const std::string json = doc.json.dump(2) + "\n";
  if (!opts.out) {
    stdout_stream << (opts.format == "json" ? json : doc.markdown);
    return;
  }
  if (opts.format != "markdown") write_file(*opts.out + ".json", json);
  if (opts.format != "json") write_file(*opts.out + ".md", doc.markdown);
}

inline RunInfo run_info(const std::string& command, std::uint64_t seed) {
  RunInfo r;
  r.command = command;
  r.seed = seed;
  return r;
}

// ---- fd -------------------------------------------------------------------

struct FdOptions {
  std::string manifest;
  bool relative = false;
  unsigned threads = 0;
};

inline CommandOutput cmd_fd(const FdOptions& o, const OutputOptions& out) {
  const auto manifest = load_manifest(o.manifest);
  const auto cells = batch_fd_cells(manifest, o.relative, out.seed, o.threads);
  const MetricTable table = to_metric_table(cells, o.relative);

  Report report;
  report.run = run_info(o.relative ? "fd --relative" : "fd", out.seed);
  report.tables.push_back({o.relative ? "Relative Frechet distance" : "Frechet distance", table});

  nlohmann::json j = to_json(table);
  j["run"] = report.run;
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json d{{"dataset", c.dataset},
                     {"extractor", c.extractor},
                     {"model_tag", c.model_tag},
                     {"fd", c.fd.value},
                     {"reference_id", c.fd.reference_id},
                     {"candidate_id", c.fd.candidate_id},
                     {"min_eigenvalue", c.fd.diagnostics.min_eigenvalue},
                     {"regularization_applied", c.fd.diagnostics.regularization_applied},
                     {"rank_deficient", c.fd.diagnostics.rank_deficient}};
    if (c.rfd) {
      d["rfd"] = c.rfd->value;
      d["split_fd"] = c.rfd->denominator.value;
      d["split_seed"] = c.rfd->split_seed;
    }
    diag.push_back(std::move(d));
  }
  j["diagnostics"] = std::move(diag);
  return {std::move(j), emit_report(report, ReportFormat::kMarkdown)};
}

// ---- vtt-analyze ----------------------------------------------------------

struct VttAnalyzeOptions {
  std::vector<std::string> inputs;  // "[study_id=]path"
  double alpha_t = 0.10;
  double alpha_ks = 0.10;
  std::string variant = "pooled";
};

inline std::pair<std::string, std::string> split_study_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && eq > 0) return {arg.substr(0, eq), arg.substr(eq + 1)};
  std::string stem = std::filesystem::path(arg).stem().string();
  return {stem.empty() ? arg : stem, arg};
}

inline CommandOutput cmd_vtt_analyze(const VttAnalyzeOptions& o, const OutputOptions& out) {
  if (o.inputs.empty()) throw ValidationError("vtt-analyze: no response files given");
  if (!(o.alpha_t > 0 && o.alpha_t < 1) || !(o.alpha_ks > 0 && o.alpha_ks < 1)) {
    throw ValidationError("alpha values must lie in (0, 1)");
  }
  VttOptions vo{o.alpha_t, o.alpha_ks, parse_variant(o.variant)};
  Report report;
  report.run = run_info("vtt-analyze", out.seed);
  report.run.alphas = {{"t", o.alpha_t}, {"ks", o.alpha_ks}};
  report.run.t_test_variant = o.variant;
  std::set<std::string> seen;
  for (const auto& arg : o.inputs) {
    const auto [study_id, path] = split_study_arg(arg);
    if (!seen.insert(study_id).second) throw ValidationError("vtt-analyze: study id '" + study_id + "' given twice");
    report.vtt.push_back(analyze_study(load_responses_csv(path, study_id), vo));
  }
  return {report_to_json(report), emit_report(report, ReportFormat::kMarkdown)};
}

// ---- rank -----------------------------------------------------------------

struct RankOptions {
  std::vector<std::string> tables;
  std::optional<std::string> human;
  std::vector<std::string> correlate;  // "metric=statistic"
  std::string baseline = "None";
  double alpha = 0.05;
};

inline MetricTable load_tables(const std::vector<std::string>& paths) {
  MetricTable merged;
  for (const auto& p : paths) merged.merge(load_metric_table(p));
  return merged;
}

inline CommandOutput cmd_rank(const RankOptions& o, const OutputOptions& out) {
  if (o.tables.empty()) throw ValidationError("rank: at least one --table is required");
  if (!o.correlate.empty() && !o.human) throw ValidationError("rank: --correlate needs --human");
  const MetricTable table = load_tables(o.tables);

  Report report;
  report.run = run_info("rank", out.seed);
  report.run.alphas = {{"correlation", o.alpha}};
  report.baseline = o.baseline;
  report.tables.push_back({"Metrics", table});
  for (const auto& ds : table.datasets())
    for (const auto& m : table.metrics(ds)) report.rankings.push_back(rank(table, ds, m));
  report.consistency = consistency(table);

  if (o.human) {
    const MetricTable human = load_human_csv(*o.human);
    report.tables.push_back({"Human judgment", human});
    for (const auto& spec : o.correlate) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
        throw ValidationError("--correlate expects metric=statistic, got '" + spec + "'");
      }
      const std::string metric = spec.substr(0, eq), stat = spec.substr(eq + 1);
      if (!table.directions.contains(metric)) throw ValidationError("--correlate: unknown metric '" + metric + "'");
      if (!human.directions.contains(stat)) throw ValidationError("--correlate: unknown statistic '" + stat + "'");
      report.correlations.push_back(
          {metric, stat, correlate_with_humans(table, metric, human_statistic(human, stat), o.alpha)});
    }
  }
  return {report_to_json(report), emit_report(report, ReportFormat::kMarkdown)};
}

// ---- benchmark-aug --------------------------------------------------------

struct BenchmarkOptions {
  std::vector<std::string> tables;
  std::optional<std::string> human;
  std::string metric;   // exact id, or a prefix ending in '*'
  std::string pairing;  // by-dataset | by-dataset-extractor
  std::string baseline = "None";
  std::string alternative = "two-sided";
  double alpha = 0.05;
};

inline bool metric_matches(const std::string& selector, const std::string& metric) {
  if (selector.ends_with('*')) return metric.starts_with(selector.substr(0, selector.size() - 1));
  return selector == metric;
}

// Paired t-tests of each augmentation against the baseline. Within a pair,
// x is the baseline value and y the augmentation value, so "greater" tests
// baseline > augmentation.
inline std::vector<BenchmarkEntry> benchmark_augmentations(const MetricTable& table, const std::string& selector,
                                                           const std::string& pairing, const std::string& baseline,
                                                           Alternative alt, double alpha) {
  if (pairing != "by-dataset" && pairing != "by-dataset-extractor") {
    throw ValidationError("--pairing must be by-dataset or by-dataset-extractor, got '" + pairing + "'");
  }
  std::vector<std::string> metrics;
  for (const auto& [m, d] : table.directions)
    if (metric_matches(selector, m)) metrics.push_back(m);
  if (metrics.empty()) throw ValidationError("--metric '" + selector + "' matches no metric");
  if (pairing == "by-dataset" && metrics.size() != 1) {
    throw ValidationError("by-dataset pairing needs exactly one metric, but '" + selector + "' matches " +
                          std::to_string(metrics.size()) + "; use by-dataset-extractor");
  }

  std::set<std::string> augs;
  for (const auto& [key, v] : table.cells)
    if (key.augmentation != baseline && std::find(metrics.begin(), metrics.end(), key.metric) != metrics.end())
      augs.insert(key.augmentation);

  std::vector<BenchmarkEntry> out;
  for (const auto& aug : augs) {
    std::vector<double> x, y;
    for (const auto& ds : table.datasets()) {
      for (const auto& m : metrics) {
        auto b = table.get(ds, baseline, m);
        auto a = table.get(ds, aug, m);
        if (b && a) {
          x.push_back(*b);
          y.push_back(*a);
        }
      }
    }
    if (x.size() < 2) {
      throw ValidationError("benchmark: " + aug + " vs " + baseline + " has " + std::to_string(x.size()) +
                            " matched pairs under " + pairing + ", need at least 2");
    }
    out.push_back({aug, baseline, selector, pairing, x.size(), paired_t_test(x, y, alt, alpha)});
  }
  if (out.empty()) throw ValidationError("benchmark: no augmentation besides the baseline '" + baseline + "'");
  return out;
}

inline CommandOutput cmd_benchmark_aug(const BenchmarkOptions& o, const OutputOptions& out) {
  if (o.tables.empty() && !o.human) throw ValidationError("benchmark-aug: give --table and/or --human");
  MetricTable table = load_tables(o.tables);
  if (o.human) table.merge(load_human_csv(*o.human));
  const Alternative alt = parse_alternative(o.alternative);

  Report report;
  report.run = run_info("benchmark-aug", out.seed);
  report.run.alphas = {{"t", o.alpha}};
  report.run.pairing = o.pairing;
  report.baseline = o.baseline;
  report.benchmarks = benchmark_augmentations(table, o.metric, o.pairing, o.baseline, alt, o.alpha);
  return {report_to_json(report), emit_report(report, ReportFormat::kMarkdown)};
}

// Maps an exception thrown by a command to its exit code.
inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return ExitCode::kNumerical;
  return ExitCode::kValidation;
}

}  // namespace genimg_eval::cli
