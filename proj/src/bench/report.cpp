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

#include <iomanip>
#include <ostream>

#include "namdb/bench.hpp"

namespace namdb::bench {

void write_summary(std::ostream& os, const ExperimentConfig& cfg) {
  os << "# resolved configuration\n";
  os << "workload = " << cfg.workload << '\n';
  os << "protocol = " << cfg.protocol << '\n';
  os << "algorithm = " << cfg.algorithm << '\n';
  os << "transport = " << fabric::to_string(cfg.transport) << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "storage_nodes = " << cfg.storage_nodes << '\n';
  os << "clients = " << cfg.clients << '\n';
  os << "products = " << cfg.products << '\n';
  os << "txns_per_client = " << cfg.txns_per_client << '\n';
  os << "product_payload_bytes = " << cfg.product_payload_bytes << '\n';
  os << "insert_payload_bytes = " << cfg.insert_payload_bytes << '\n';
  os << "olap_nodes = " << cfg.olap_nodes << '\n';
  os << "relation_tuples = " << cfg.relation_tuples << '\n';
  os << "selectivity = " << cfg.selectivity << '\n';
  os << "bloom_eps = " << cfg.bloom_eps << '\n';
  os << "distinct_keys = " << cfg.distinct_keys << '\n';
  os << "agg_fn = " << cfg.agg_fn << '\n';
  os << "verify = " << (cfg.verify ? 1 : 0) << '\n';
}

namespace {

void write_verdicts(std::ostream& os,
                    const std::vector<CheckVerdict>& verdicts) {
  for (const auto& v : verdicts) {
    os << (v.pass ? "[PASS] " : "[FAIL] ") << v.name;
    if (!v.pass && !v.detail.empty()) {
      os << " (" << v.detail << ')';
    }
    os << '\n';
  }
}

}  // namespace

void write_oltp_report(std::ostream& os, const OltpReport& report) {
  os << "attempted " << report.attempted << ", committed " << report.committed
     << ", aborted " << report.aborted << " (abort rate "
     << (report.attempted
             ? static_cast<double>(report.aborted) / report.attempted
             : 0.0)
     << ")\n";
  for (const auto& [reason, n] : report.abort_reasons) {
    os << "  aborts[" << reason << "] = " << n << '\n';
  }
  os << std::setprecision(6);
  os << "modeled commit latency: mean " << report.mean_commit_latency * 1e6
     << " us, p50 " << report.p50_commit_latency * 1e6 << " us, p95 "
     << report.p95_commit_latency * 1e6 << " us\n";
  os << "modeled txn latency: mean " << report.mean_txn_latency * 1e6
     << " us\n";
  os << "storage-node cycles: " << report.storage_node_cycles << '\n';
  write_verdicts(os, report.verdicts);
}

void write_oltp_csv(std::ostream& os, const ExperimentConfig& cfg,
                    const OltpReport& report) {
  os << "protocol,transport,storage_nodes,clients,products,txns_per_client,"
        "seed,attempted,committed,aborted,mean_commit_latency_s,"
        "p50_commit_latency_s,p95_commit_latency_s,storage_cycles,checks\n";
  os << cfg.protocol << ',' << fabric::to_string(cfg.transport) << ','
     << cfg.storage_nodes << ',' << cfg.clients << ',' << cfg.products << ','
     << cfg.txns_per_client << ',' << cfg.seed << ',' << report.attempted
     << ',' << report.committed << ',' << report.aborted << ','
     << report.mean_commit_latency << ',' << report.p50_commit_latency << ','
     << report.p95_commit_latency << ',' << report.storage_node_cycles << ','
     << (report.all_passed() ? "pass" : "fail") << '\n';
}

void write_olap_report(std::ostream& os, const OlapReport& report) {
  for (const auto& row : report.joins) {
    os << row.algorithm << ": " << row.result_cardinality << " matches, "
       << row.stats.tuples_shuffled << " tuples shuffled ("
       << row.stats.bytes_shuffled << " bytes), wall " << row.wall_ms
       << " ms";
    if (row.stats.max_write_payload > 0) {
      os << ", max flush " << row.stats.max_write_payload << " B, "
         << row.stats.signaled_flushes << " signaled / "
         << row.stats.unsignaled_flushes << " unsignaled flushes"
         << ", storage cycles during shuffle "
         << row.stats.storage_cycles_partition;
    }
    if (row.stats.filter_bytes_broadcast > 0) {
      os << ", filter broadcast " << row.stats.filter_bytes_broadcast << " B"
         << ", filtered out " << row.stats.tuples_filtered_out;
    }
    os << '\n';
  }
  for (const auto& row : report.aggs) {
    os << row.algorithm << ": " << row.groups << " groups, wall "
       << row.wall_ms << " ms";
    if (row.algorithm == "hierarchical") {
      os << ", union rows shipped " << row.stats.union_rows_shipped;
    } else {
      os << ", overflow flushes " << row.stats.overflow_flushes << ", "
         << row.stats.partitions << " partitions for " << row.stats.workers
         << " workers";
    }
    os << '\n';
  }
  write_verdicts(os, report.verdicts);
}

void write_olap_csv(std::ostream& os, const ExperimentConfig& cfg,
                    const OlapReport& report) {
  if (!report.joins.empty()) {
    os << "algorithm,transport,nodes,tuples,selectivity,bloom_eps,seed,"
          "matches,tuples_shuffled,bytes_shuffled,filter_bytes,"
          "max_write_payload,signaled_flushes,unsignaled_flushes,"
          "storage_cycles_partition,wall_ms,verified\n";
    for (const auto& row : report.joins) {
      os << row.algorithm << ',' << fabric::to_string(cfg.transport) << ','
         << cfg.olap_nodes << ',' << cfg.relation_tuples << ','
         << cfg.selectivity << ',' << cfg.bloom_eps << ',' << cfg.seed << ','
         << row.result_cardinality << ',' << row.stats.tuples_shuffled << ','
         << row.stats.bytes_shuffled << ','
         << row.stats.filter_bytes_broadcast << ','
         << row.stats.max_write_payload << ',' << row.stats.signaled_flushes
         << ',' << row.stats.unsignaled_flushes << ','
         << row.stats.storage_cycles_partition << ',' << row.wall_ms << ','
         << (row.verified ? 1 : 0) << '\n';
    }
  }
  if (!report.aggs.empty()) {
    os << "algorithm,transport,nodes,tuples,distinct_keys,agg_fn,seed,groups,"
          "union_rows,overflow_flushes,partitions,workers,wall_ms,verified\n";
    for (const auto& row : report.aggs) {
      os << row.algorithm << ',' << fabric::to_string(cfg.transport) << ','
         << cfg.olap_nodes << ',' << cfg.relation_tuples << ','
         << cfg.distinct_keys << ',' << cfg.agg_fn << ',' << cfg.seed << ','
         << row.groups << ',' << row.stats.union_rows_shipped << ','
         << row.stats.overflow_flushes << ',' << row.stats.partitions << ','
         << row.stats.workers << ',' << row.wall_ms << ','
         << (row.verified ? 1 : 0) << '\n';
    }
  }
}

}  // namespace namdb::bench
