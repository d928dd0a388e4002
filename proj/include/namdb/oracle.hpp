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

#ifndef NAMDB_ORACLE_HPP_
#define NAMDB_ORACLE_HPP_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "namdb/fabric.hpp"

// Timestamp service backed by a bitvector in fabric memory. Timestamps are
// pre-assigned round robin: with C clients, timestamp t belongs to client
// ((t-1) mod C) + 1, so clients hand themselves CIDs without any network
// traffic and publish a commit by switching its bit from 0 to 1. The read
// timestamp (RID) is the highest timestamp t such that bits 1..t are all
// set.
//
// The vector is stored as one region holding C byte-disjoint stripes, one
// per client, each covering that client's slots in logical order. A client
// only ever writes bytes inside its own stripe, so publication is a plain
// unsignaled WRITE; an RID read fetches the whole region with a single
// READ and merges the per-stripe prefix lengths.

namespace namdb::oracle {

struct WouldWrap : std::runtime_error {
  WouldWrap() : std::runtime_error("timestamp vector exhausted") {}
};

struct NotOwned : std::runtime_error {
  NotOwned() : std::runtime_error("cid not owned by this client") {}
};

class TimestampVector {
 public:
  TimestampVector(fabric::Fabric& fabric, fabric::NodeId host,
                  std::uint32_t num_clients, std::uint64_t total_bits = 60000);

  std::uint32_t num_clients() const { return num_clients_; }
  std::uint64_t total_bits() const { return total_bits_; }
  std::size_t stripe_bytes() const { return stripe_bytes_; }
  const fabric::MemoryRegion& region() const { return region_; }

  // Number of slots owned by 1-based client c.
  std::uint64_t slots_of(std::uint32_t client) const;

  // Merges raw vector bytes into the highest consecutive committed
  // timestamp; exposed for the oracle tests.
  std::uint64_t merge_rid(const std::vector<std::uint8_t>& bytes) const;

 private:
  friend class OracleClient;

  std::uint32_t num_clients_;
  std::uint64_t total_bits_;
  std::size_t stripe_bytes_;
  fabric::MemoryRegion region_;
};

// Per-client handle. Not thread-safe; one per client session.
class OracleClient {
 public:
  OracleClient(TimestampVector& vec, fabric::Session& session,
               std::uint32_t client_id);

  std::uint32_t client_id() const { return client_id_; }

  // k-th call returns (k-1)*C + client_id; purely local.
  std::uint64_t next_cid();

  // Sets the bit for cid with one unsignaled WRITE into this client's
  // stripe. Idempotent. cid must have been returned by next_cid.
  void publish_commit(std::uint64_t cid);

  // Highest consecutive committed timestamp, from one READ of the vector.
  std::uint64_t current_rid();

 private:
  TimestampVector& vec_;
  fabric::Session& session_;
  std::uint32_t client_id_;
  std::uint64_t next_slot_ = 0;
  std::uint64_t issued_upto_ = 0;            // highest cid handed out
  std::vector<std::uint8_t> stripe_shadow_;  // local copy of own stripe
};

}  // namespace namdb::oracle

#endif  // NAMDB_ORACLE_HPP_
