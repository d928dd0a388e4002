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

#ifndef NAMDB_BENCH_HPP_
#define NAMDB_BENCH_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "namdb/costmodel.hpp"
#include "namdb/olap.hpp"
#include "namdb/oltp.hpp"

// Benchmark harness: deterministic workload generators, experiment
// runners over configurable topologies, and CSV/report emission. A given
// (seed, config) pair generates byte-identical workloads; correctness
// verdicts must hold under every thread interleaving.

namespace namdb::bench {

struct ExperimentConfig {
  std::string workload = "oltp";  // oltp | olap-join | olap-agg | costmodel
  std::string protocol = "rsi";   // rsi | trad
  std::string algorithm = "all";
  fabric::Transport transport = fabric::Transport::kRdma;
  std::uint64_t seed = 42;

  // OLTP checkout workload
  std::uint32_t storage_nodes = 3;
  std::uint32_t clients = 4;
  std::uint64_t products = 10000;
  std::uint64_t txns_per_client = 250;
  std::size_t product_payload_bytes = 1016;  // 1024-byte record blocks
  std::size_t insert_payload_bytes = 120;    // order/orderline records
  std::uint64_t timestamp_bits = 60000;
  int lock_retries = 10;

  // OLAP
  std::uint32_t olap_nodes = 4;
  std::uint64_t relation_tuples = 100000;  // per relation, total
  double selectivity = 0.5;
  double bloom_eps = 0.1;
  std::uint64_t distinct_keys = 65536;
  std::string agg_fn = "sum";
  std::uint64_t oracle_cap = 100000;  // verify only at or below this size
  bool verify = true;

  // Cost model
  std::uint64_t curve_points = 21;  // selectivity grid 0..1

  fabric::LatencyModel latency = fabric::LatencyModel::defaults();
};

// Parses `key = value` lines ('#' starts a comment). Unknown keys are an
// error. Returns an error message or nullopt.
std::optional<std::string> apply_config_line(ExperimentConfig& cfg,
                                             const std::string& line);
std::optional<std::string> load_config_file(ExperimentConfig& cfg,
                                            const std::string& path);

// Deterministic 64-bit generator (splitmix64).
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  double unit();                         // uniform in [0, 1)
};

// One checkout transaction: 3 distinct product reads, 3 stock updates,
// 1 order and 3 orderline inserts.
struct CheckoutTxn {
  std::array<std::uint64_t, 3> product_keys;
  std::uint64_t order_tag = 0;  // seeds the generated payload contents
};

CheckoutTxn gen_checkout_txn(Rng& rng, std::uint64_t products);
std::vector<std::uint8_t> gen_payload(std::size_t bytes, std::uint64_t tag);

struct CheckVerdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct OltpReport {
  std::uint64_t attempted = 0;
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;
  std::map<std::string, std::uint64_t> abort_reasons;
  double mean_commit_latency = 0;  // committed txns, modeled seconds
  double p50_commit_latency = 0;
  double p95_commit_latency = 0;
  double mean_txn_latency = 0;
  double storage_node_cycles = 0;
  fabric::MetricsSnapshot metrics;
  std::vector<oltp::TxnDescriptor> history;
  std::vector<CheckVerdict> verdicts;

  bool all_passed() const;
};

OltpReport run_oltp(const ExperimentConfig& cfg);

struct JoinAlgoReport {
  std::string algorithm;
  std::uint64_t result_cardinality = 0;
  olap::JoinStats stats;
  double wall_ms = 0;
  bool verified = false;  // matched the reference join (when enabled)
};

struct AggAlgoReport {
  std::string algorithm;
  std::uint64_t groups = 0;
  olap::AggStats stats;
  double wall_ms = 0;
  bool verified = false;
};

struct OlapReport {
  std::vector<JoinAlgoReport> joins;
  std::vector<AggAlgoReport> aggs;
  std::vector<CheckVerdict> verdicts;

  bool all_passed() const;
};

OlapReport run_olap_join(const ExperimentConfig& cfg);
OlapReport run_olap_agg(const ExperimentConfig& cfg);

// Join inputs with controlled match selectivity: R keys are distinct;
// sel*|S| tuples of S draw keys from R, the rest from a disjoint range.
void gen_join_relations(std::uint64_t seed, std::uint64_t tuples,
                        double selectivity, std::uint32_t parts,
                        olap::Relation* r, olap::Relation* s);

// Aggregation input: group keys uniform over [0, distinct), 16-byte tuples.
olap::Relation gen_agg_relation(std::uint64_t seed, std::uint64_t tuples,
                                std::uint64_t distinct, std::uint32_t parts);

// Reference implementations used for result verification: an all-pairs
// join (literal nested loop for small inputs, sorted expansion above) and
// a single-threaded aggregation.
std::vector<olap::Match> reference_join(const olap::Relation& r,
                                        const olap::Relation& s);
std::vector<std::pair<std::uint64_t, std::uint64_t>> reference_agg(
    const olap::Relation& r, olap::AggFn fn);

// Cost-model runner: curve CSV plus the throughput/bandwidth bound rows.
void run_costmodel(const ExperimentConfig& cfg, std::ostream& csv,
                   std::ostream& summary);

// Report emission.
void write_summary(std::ostream& os, const ExperimentConfig& cfg);
void write_oltp_report(std::ostream& os, const OltpReport& report);
void write_oltp_csv(std::ostream& os, const ExperimentConfig& cfg,
                    const OltpReport& report);
void write_olap_report(std::ostream& os, const OlapReport& report);
void write_olap_csv(std::ostream& os, const ExperimentConfig& cfg,
                    const OlapReport& report);

}  // namespace namdb::bench

#endif  // NAMDB_BENCH_HPP_
