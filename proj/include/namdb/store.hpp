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

#ifndef NAMDB_STORE_HPP_
#define NAMDB_STORE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "namdb/fabric.hpp"

// Passive storage-node layer. Records live in slotted multi-version
// "record blocks" inside registered fabric regions; all logic runs on the
// client side through one-sided verbs. Byte layout of a block with payload
// width m bytes and n slots (all words little-endian):
//
//   [0,8)                  header word: lock bit (MSB) | newest CID (63 bit)
//   [8, 8+m)               newest payload
//   per older slot i=1..n-1:
//   [..,+8)                CID_i (full word, MSB always zero)
//   [..,+m)                payload_i
//
// Unused older slots hold CID 0. Total size = 8 + m + (n-1)*(8 + m).

namespace namdb::store {

using fabric::NodeId;
using fabric::RemoteAddress;

constexpr std::uint64_t kMaxCid = (std::uint64_t{1} << 63) - 1;

std::uint64_t encode_record_header(bool locked, std::uint64_t cid);
// Returns {locked, cid}.
std::pair<bool, std::uint64_t> decode_record_header(std::uint64_t word);

std::size_t record_block_size(std::size_t payload_bytes, std::size_t slots);

// Configuration default for the number of version slots given the record
// payload size: max(16KiB / payload, 2). The shipped protocol default is a
// single slot (older snapshots abort).
std::size_t default_slot_count(std::size_t payload_bytes);

struct RecordBlock {
  bool locked = false;
  std::uint64_t head_cid = 0;
  std::vector<std::uint8_t> head_payload;
  struct OlderVersion {
    std::uint64_t cid = 0;
    std::vector<std::uint8_t> payload;
  };
  std::vector<OlderVersion> older;  // slots-1 entries, newest first

  // Installs a new head version, shifting existing versions one slot back
  // (the oldest falls off). Clears the lock.
  void push_version(std::uint64_t cid, std::span<const std::uint8_t> payload);
};

std::vector<std::uint8_t> encode_block(const RecordBlock& block,
                                       std::size_t payload_bytes,
                                       std::size_t slots);
RecordBlock decode_block(std::span<const std::uint8_t> bytes,
                         std::size_t payload_bytes, std::size_t slots);

struct TableSpec {
  std::string name;
  std::size_t payload_bytes = 8;
  std::size_t slots = 1;
  // Maximum records per storage node.
  std::uint64_t capacity_per_node = 1024;
};

// Global dictionary entry: where a table lives. Key k maps to storage node
// k mod N with dense local index k div N, so addresses are computable
// without any directory lookups.
struct Table {
  TableSpec spec;
  std::vector<fabric::MemoryRegion> node_regions;   // one per storage node
  std::vector<RemoteAddress> allocator_words;       // next-free counters
  std::size_t block_size = 0;
};

// Creates tables on the storage nodes and resolves keys to addresses.
class Catalog {
 public:
  Catalog(fabric::Fabric& fabric, std::vector<NodeId> storage_nodes);

  const std::vector<NodeId>& storage_nodes() const { return storage_nodes_; }
  std::size_t node_count() const { return storage_nodes_.size(); }

  Table& create_table(const TableSpec& spec);
  Table& table(const std::string& name);

  RemoteAddress locate(const Table& t, std::uint64_t key) const;
  RemoteAddress header_address(const Table& t, std::uint64_t key) const {
    return locate(t, key);
  }

  // Key owned by storage node node_idx at dense local index; the inverse
  // of locate's partitioning.
  std::uint64_t key_for(std::size_t node_idx, std::uint64_t local_index) const {
    return local_index * storage_nodes_.size() + node_idx;
  }

 private:
  fabric::Fabric& fabric_;
  std::vector<NodeId> storage_nodes_;
  std::vector<std::unique_ptr<Table>> tables_;
};

struct StoreError : std::runtime_error {
  explicit StoreError(const std::string& what) : std::runtime_error(what) {}
};

// Client-side record operations; stateless apart from fabric memory.
class StoreClient {
 public:
  StoreClient(Catalog& catalog, fabric::Session& session)
      : catalog_(catalog), session_(session) {}

  Catalog& catalog() { return catalog_; }

  // One READ of the whole block.
  RecordBlock read_block(const Table& t, std::uint64_t key);

  // Full-block WRITE (used by loaders and by commit installs).
  void write_block(const Table& t, std::uint64_t key, const RecordBlock& b);

  // Allocates a fresh key via FETCH_ADD on the target node's counter and
  // writes the initial block; never conflicts.
  std::uint64_t insert_block(const Table& t,
                             std::span<const std::uint8_t> payload,
                             std::uint64_t cid);

 private:
  Catalog& catalog_;
  fabric::Session& session_;
  std::uint64_t insert_rr_ = 0;  // round-robin node choice for inserts
};

}  // namespace namdb::store

#endif  // NAMDB_STORE_HPP_
