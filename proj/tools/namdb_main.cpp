// Copyright 2026 The namdb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "namdb/bench.hpp"

namespace {

using namdb::bench::ExperimentConfig;

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::string transport;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts* opts, ExperimentConfig* cfg) {
  cmd->add_option("--config", opts->config_path,
                  "config file with `key = value` lines");
  cmd->add_option("--out", opts->out_path, "write the CSV report here");
  cmd->add_option("--seed", cfg->seed, "workload seed");
  cmd->add_option("--set", opts->overrides,
                  "extra `key=value` config overrides")
      ->take_all();
  cmd->add_option("--transport", opts->transport,
                  "rdma | ipoib | ipoeth");
}

int apply_common(const CommonOpts& opts, ExperimentConfig* cfg) {
  if (!opts.config_path.empty()) {
    if (auto err = namdb::bench::load_config_file(*cfg, opts.config_path)) {
      std::cerr << "error: " << *err << '\n';
      return 2;
    }
  }
  for (const auto& line : opts.overrides) {
    if (auto err = namdb::bench::apply_config_line(*cfg, line)) {
      std::cerr << "error: " << *err << '\n';
      return 2;
    }
  }
  if (!opts.transport.empty() &&
      !namdb::fabric::parse_transport(opts.transport, &cfg->transport)) {
    std::cerr << "error: unknown transport " << opts.transport << '\n';
    return 2;
  }
  return 0;
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
  if (path.empty()) {
    return nullptr;
  }
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) {
    throw std::runtime_error("cannot open output file: " + path);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "namdb: snapshot-isolation commit protocols, distributed operators "
      "and cost models on a simulated RDMA fabric"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  CommonOpts opts;

  auto* oltp = app.add_subcommand("oltp", "checkout workload benchmark");
  add_common(oltp, &opts, &cfg);
  oltp->add_option("--protocol", cfg.protocol, "rsi | trad");
  oltp->add_option("--clients", cfg.clients, "client sessions");
  oltp->add_option("--storage-nodes", cfg.storage_nodes,
                   "storage nodes / resource managers");
  oltp->add_option("--products", cfg.products, "product table size");
  oltp->add_option("--txns", cfg.txns_per_client, "transactions per client");

  auto* join = app.add_subcommand("olap-join", "distributed join benchmark");
  add_common(join, &opts, &cfg);
  join->add_option("--algorithm", cfg.algorithm,
                   "ghj | ghj_bloom | rdma_ghj | rrj | all");
  join->add_option("--nodes", cfg.olap_nodes, "worker/storage nodes");
  join->add_option("--tuples", cfg.relation_tuples, "tuples per relation");
  join->add_option("--selectivity", cfg.selectivity, "match selectivity");
  join->add_option("--bloom-eps", cfg.bloom_eps,
                   "Bloom filter false-positive rate");

  auto* agg = app.add_subcommand("olap-agg", "distributed aggregation benchmark");
  add_common(agg, &opts, &cfg);
  agg->add_option("--algorithm", cfg.algorithm, "hierarchical | rdma | all");
  agg->add_option("--nodes", cfg.olap_nodes, "worker/storage nodes");
  agg->add_option("--tuples", cfg.relation_tuples, "input tuples");
  agg->add_option("--distinct-keys", cfg.distinct_keys, "group-by key count");
  agg->add_option("--agg-fn", cfg.agg_fn, "sum | count | min | max");

  auto* costs = app.add_subcommand("costmodel",
                                   "cost curves and throughput bounds");
  add_common(costs, &opts, &cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (oltp->parsed()) {
      cfg.workload = "oltp";
    } else if (join->parsed()) {
      cfg.workload = "olap-join";
    } else if (agg->parsed()) {
      cfg.workload = "olap-agg";
    } else {
      cfg.workload = "costmodel";
    }
    if (int rc = apply_common(opts, &cfg); rc != 0) {
      return rc;
    }
    auto csv_file = open_out(opts.out_path);

    namdb::bench::write_summary(std::cout, cfg);
    std::cout << '\n';

    if (cfg.workload == "oltp") {
      auto report = namdb::bench::run_oltp(cfg);
      namdb::bench::write_oltp_report(std::cout, report);
      namdb::bench::write_oltp_csv(csv_file ? *csv_file : std::cout, cfg,
                                   report);
      return report.all_passed() ? 0 : 1;
    }
    if (cfg.workload == "olap-join") {
      auto report = namdb::bench::run_olap_join(cfg);
      namdb::bench::write_olap_report(std::cout, report);
      namdb::bench::write_olap_csv(csv_file ? *csv_file : std::cout, cfg,
                                   report);
      return report.all_passed() ? 0 : 1;
    }
    if (cfg.workload == "olap-agg") {
      auto report = namdb::bench::run_olap_agg(cfg);
      namdb::bench::write_olap_report(std::cout, report);
      namdb::bench::write_olap_csv(csv_file ? *csv_file : std::cout, cfg,
                                   report);
      return report.all_passed() ? 0 : 1;
    }
    namdb::bench::run_costmodel(cfg, csv_file ? *csv_file : std::cout,
                                std::cout);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
