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

#ifndef NAMDB_OLAP_HPP_
#define NAMDB_OLAP_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "namdb/fabric.hpp"

// Distributed join and aggregation operators. The grace hash join and its
// Bloom-reduced variant shuffle over two-sided messaging on a configurable
// transport; the RDMA variants partition with unsignaled one-sided WRITEs
// into reserved remote regions (selective signaling), so storage-side CPUs
// stay idle during the shuffle.

namespace namdb::olap {

using fabric::NodeId;
using fabric::Transport;

// Horizontally partitioned relation. Tuple width 8 means key-only tuples;
// width 16 adds a 64-bit payload (the aggregation value).
struct Relation {
  std::size_t tuple_width = 8;
  struct Part {
    std::vector<std::uint64_t> keys;
    std::vector<std::uint64_t> payloads;  // empty when width == 8
  };
  std::vector<Part> parts;

  bool has_payload() const { return tuple_width == 16; }
  std::uint64_t total_tuples() const;
  std::uint64_t total_bytes() const { return total_tuples() * tuple_width; }
};

struct Match {
  std::uint64_t key = 0;
  std::uint64_t r_payload = 0;
  std::uint64_t s_payload = 0;

  friend bool operator==(const Match&, const Match&) = default;
  friend auto operator<=>(const Match&, const Match&) = default;
};

struct OlapConfig {
  std::uint32_t nodes = 4;
  std::uint64_t hash_seed = 0x7A3C9D1B;
  std::size_t shuffle_chunk_bytes = 64 * 1024;  // two-sided shuffle framing
  std::size_t flush_bytes = 2048;               // software-managed buffers
  std::size_t signal_interval = 16;             // every n-th flush signaled
  std::size_t l3_budget_bytes = 16 * 1024 * 1024;
  std::size_t cache_block_bytes = 256 * 1024;
  std::size_t agg_table_entries = 4096;  // core-cache-sized pre-aggregation
  double bloom_eps = 0.1;
};

struct JoinStats {
  std::uint64_t matches = 0;
  std::uint64_t tuples_shuffled = 0;  // tuples sent to a different node
  std::uint64_t bytes_shuffled = 0;
  std::uint64_t filter_bytes_broadcast = 0;  // ghj_bloom
  std::uint64_t tuples_filtered_out = 0;     // ghj_bloom
  std::uint64_t max_write_payload = 0;       // rdma variants
  std::uint64_t signaled_flushes = 0;
  std::uint64_t unsignaled_flushes = 0;
  double storage_cycles_partition = 0;  // target-side cycles during shuffle
};

struct JoinResult {
  std::vector<Match> matches;
  JoinStats stats;
};

// Standard Bloom filter sized from the expected element count and target
// false-positive rate; double hashing over a seeded 64-bit mixer. Merging
// partial filters built with identical parameters is a bitwise OR.
class BloomFilter {
 public:
  BloomFilter(std::uint64_t expected_n, double eps, std::uint64_t seed);

  void insert(std::uint64_t key);
  bool contains(std::uint64_t key) const;
  void merge_bytes(const std::vector<std::uint8_t>& other);

  const std::vector<std::uint8_t>& bytes() const { return bits_; }
  std::vector<std::uint8_t>& mutable_bytes() { return bits_; }
  std::uint64_t bit_count() const { return m_bits_; }
  std::uint32_t hash_count() const { return k_; }

 private:
  std::uint64_t m_bits_;
  std::uint32_t k_;
  std::uint64_t seed_;
  std::vector<std::uint8_t> bits_;
};

// Per-partition staging buffers flushed to reserved remote regions with
// unsignaled WRITEs (every n-th flush signaled, plus a final signaled
// flush per buffer). The whole buffer set must fit the L3 budget.
class SoftwareManagedBuffers {
 public:
  struct Target {
    fabric::RemoteAddress base;
    std::uint64_t capacity = 0;
  };

  SoftwareManagedBuffers(fabric::Session& session, std::vector<Target> targets,
                         const OlapConfig& cfg);

  // record_len must divide the flush size; flushes when the record no
  // longer fits.
  void append(std::size_t part, const std::uint8_t* record,
              std::size_t record_len);
  // Flushes every non-empty buffer with a signaled WRITE and drains the
  // completions.
  void finish();

  std::uint64_t bytes_written(std::size_t part) const {
    return offsets_[part];
  }
  std::uint64_t max_payload() const { return max_payload_; }
  std::uint64_t signaled_flushes() const { return signaled_; }
  std::uint64_t unsignaled_flushes() const { return unsignaled_; }

 private:
  void flush(std::size_t part, bool force_signal);

  fabric::Session& session_;
  std::vector<Target> targets_;
  std::size_t flush_bytes_;
  std::size_t signal_interval_;
  std::vector<std::vector<std::uint8_t>> staging_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t flushes_since_signal_ = 0;
  std::uint64_t max_payload_ = 0;
  std::uint64_t signaled_ = 0;
  std::uint64_t unsignaled_ = 0;
};

// In-memory tuple batch used by the local join kernels.
struct TupleVec {
  std::vector<std::uint64_t> keys;
  std::vector<std::uint64_t> payloads;  // parallel to keys; may be empty

  void append(std::uint64_t key, std::uint64_t payload, bool has_payload);
  std::size_t size() const { return keys.size(); }
};

// Single-node radix join: one software-managed partitioning pass into
// cache-sized blocks, then per-block hash build/probe.
std::vector<Match> local_radix_join(const TupleVec& r, const TupleVec& s,
                                    const OlapConfig& cfg);

// Execution context: p workers, one per node, over a dedicated fabric.
struct OlapContext {
  fabric::Fabric* fabric = nullptr;
  std::vector<NodeId> nodes;
  OlapConfig config;
};

JoinResult ghj(OlapContext& ctx, const Relation& r, const Relation& s,
               Transport transport);
JoinResult ghj_bloom(OlapContext& ctx, const Relation& r, const Relation& s,
                     double eps, Transport transport);
JoinResult rdma_ghj(OlapContext& ctx, const Relation& r, const Relation& s);
JoinResult rrj(OlapContext& ctx, const Relation& r, const Relation& s);

enum class AggFn { kSum, kCount, kMin, kMax };

const char* to_string(AggFn fn);
bool parse_agg_fn(const std::string& s, AggFn* out);

struct AggStats {
  std::uint64_t union_rows_shipped = 0;  // hierarchical phase-2 input rows
  std::uint64_t overflow_flushes = 0;    // capacity-triggered table spills
  std::uint64_t partitions = 0;          // agg_rdma phase-2 partition count
  std::uint64_t workers = 0;
};

struct AggResult {
  // Sorted by group key.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> groups;
  AggStats stats;
};

// Local aggregation per node, then a global union merged by one node over
// two-sided messaging on the given transport.
AggResult agg_hierarchical(OlapContext& ctx, const Relation& r, AggFn fn,
                           Transport transport = Transport::kIpoEth);

// Cache-sized per-worker pre-aggregation; overflow spills stream to
// hash-partitioned remote regions in the background (one-sided, selective
// signaling); more phase-2 partitions than workers.
AggResult agg_rdma(OlapContext& ctx, const Relation& r, AggFn fn);

}  // namespace namdb::olap

#endif  // NAMDB_OLAP_HPP_
