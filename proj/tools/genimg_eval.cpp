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


// genimg_eval: Frechet-distance metrics, visual Turing test analysis and
// the VTT session server.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "genimg_eval/cli.hpp"
#include "genimg_eval/error.hpp"
#include "genimg_eval/vtt_http.hpp"
#include "genimg_eval/vtt_service.hpp"

namespace {

using namespace genimg_eval;

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

void add_output_flags(CLI::App* cmd, cli::OutputOptions& out) {
  cmd->add_option("--out", out.out, "Output file stem; writes <stem>.json and/or <stem>.md");
  cmd->add_option("--format", out.format, "json, markdown or both")
      ->check(CLI::IsMember({"json", "markdown", "both"}));
  cmd->add_option("--seed", out.seed, "Seed for every random draw");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate generative image models with Frechet distances and visual Turing tests"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  cli::OutputOptions out;

  cli::FdOptions fd;
  auto* fd_cmd = app.add_subcommand("fd", "Frechet distance table from an embedding manifest");
  fd_cmd->add_option("--manifest", fd.manifest, "Embedding manifest JSON")->required();
  fd_cmd->add_flag("--relative", fd.relative, "Divide by the distance between two halves of the real set");
  fd_cmd->add_option("--threads", fd.threads, "Worker threads (0 = hardware, capped by GENIMG_EVAL_THREADS)");
  add_output_flags(fd_cmd, out);

  cli::VttAnalyzeOptions vtt;
  auto* vtt_cmd = app.add_subcommand("vtt-analyze", "Statistics of visual Turing test responses");
  vtt_cmd->add_option("responses", vtt.inputs, "Response CSV files, optionally as study_id=path")->required();
  vtt_cmd->add_option("--alpha-t", vtt.alpha_t, "Significance level of the t-tests");
  vtt_cmd->add_option("--alpha-ks", vtt.alpha_ks, "Significance level of the KS test");
  vtt_cmd->add_option("--variant", vtt.variant, "t-test variance model")->check(CLI::IsMember({"pooled", "welch"}));
  add_output_flags(vtt_cmd, out);

  cli::RankOptions rk;
  auto* rank_cmd = app.add_subcommand("rank", "Rankings, Kendall consistency and human correlation");
  rank_cmd->add_option("--table", rk.tables, "MetricTable JSON (repeatable)")->required();
  rank_cmd->add_option("--human", rk.human, "Human statistics CSV (dataset,augmentation,statistic_name,value)");
  rank_cmd->add_option("--correlate", rk.correlate, "metric=statistic pair to correlate (repeatable)");
  rank_cmd->add_option("--baseline", rk.baseline, "Reference augmentation label");
  rank_cmd->add_option("--alpha", rk.alpha, "Significance level of the correlation test");
  add_output_flags(rank_cmd, out);

  cli::BenchmarkOptions bm;
  auto* bm_cmd = app.add_subcommand("benchmark-aug", "Paired t-tests of augmentations against the baseline");
  bm_cmd->add_option("--table", bm.tables, "MetricTable JSON (repeatable)");
  bm_cmd->add_option("--human", bm.human, "Human statistics CSV");
  bm_cmd->add_option("--metric", bm.metric, "Metric id, or a prefix ending in '*'")->required();
  bm_cmd->add_option("--pairing", bm.pairing, "by-dataset or by-dataset-extractor")
      ->required()
      ->check(CLI::IsMember({"by-dataset", "by-dataset-extractor"}));
  bm_cmd->add_option("--baseline", bm.baseline, "Reference augmentation label");
  bm_cmd->add_option("--alternative", bm.alternative, "two-sided, greater (baseline > augmentation) or less")
      ->check(CLI::IsMember({"two-sided", "greater", "less"}));
  bm_cmd->add_option("--alpha", bm.alpha, "Significance level");
  add_output_flags(bm_cmd, out);

  std::string config_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the visual Turing test server");
  serve_cmd->add_option("--config", config_path, "Service config JSON")->required();
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (serve_cmd->parsed()) {
      vtt::SessionStore store(vtt::load_service_config(config_path));
      httplib::Server server;
      vtt::bind_routes(server, store);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
      if (bound < 0) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
      std::cout << "listening on " << host << ":" << bound << std::endl;
      server.listen_after_bind();
      return 0;
    }
    cli::CommandOutput doc;
    if (fd_cmd->parsed()) {
      doc = cli::cmd_fd(fd, out);
      for (const auto& d : doc.json["diagnostics"]) {
        const std::string cell = d["dataset"].get<std::string>() + "/" + d["extractor"].get<std::string>() + "/" +
                                 d["model_tag"].get<std::string>();
        if (d["rank_deficient"].get<bool>()) std::cerr << "warning: " << cell << ": n <= d, covariance is rank-deficient\n";
        if (d["regularization_applied"].get<bool>()) std::cerr << "warning: " << cell << ": eps*I regularization applied\n";
      }
    }
    if (vtt_cmd->parsed()) doc = cli::cmd_vtt_analyze(vtt, out);
    if (rank_cmd->parsed()) doc = cli::cmd_rank(rk, out);
    if (bm_cmd->parsed()) doc = cli::cmd_benchmark_aug(bm, out);
    cli::write_outputs(doc, out, std::cout);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(cli::exit_code_for(e));
  }
}
