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

#include "namdb/store.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace namdb::store {

std::uint64_t encode_record_header(bool locked, std::uint64_t cid) {
  if (cid > kMaxCid) {
    throw std::invalid_argument("cid exceeds 63 bits");
  }
  return (locked ? (std::uint64_t{1} << 63) : 0) | cid;
}

std::pair<bool, std::uint64_t> decode_record_header(std::uint64_t word) {
  return {(word >> 63) != 0, word & kMaxCid};
}

std::size_t record_block_size(std::size_t payload_bytes, std::size_t slots) {
  if (slots == 0) {
    throw std::invalid_argument("a block needs at least one slot");
  }
  return 8 + payload_bytes + (slots - 1) * (8 + payload_bytes);
}

std::size_t default_slot_count(std::size_t payload_bytes) {
  if (payload_bytes == 0) {
    return 2;
  }
  return std::max<std::size_t>(16 * 1024 / payload_bytes, 2);
}

void RecordBlock::push_version(std::uint64_t cid,
                               std::span<const std::uint8_t> payload) {
  if (!older.empty()) {
    for (std::size_t i = older.size() - 1; i > 0; --i) {
      older[i] = std::move(older[i - 1]);
    }
    older[0].cid = head_cid;
    older[0].payload = std::move(head_payload);
  }
  locked = false;
  head_cid = cid;
  head_payload.assign(payload.begin(), payload.end());
}

std::vector<std::uint8_t> encode_block(const RecordBlock& block,
                                       std::size_t payload_bytes,
                                       std::size_t slots) {
  std::vector<std::uint8_t> out(record_block_size(payload_bytes, slots), 0);
  fabric::store_u64(out.data(), encode_record_header(block.locked, block.head_cid));
  std::size_t n = std::min(block.head_payload.size(), payload_bytes);
  std::memcpy(out.data() + 8, block.head_payload.data(), n);
  std::size_t off = 8 + payload_bytes;
  for (std::size_t i = 0; i + 1 < slots; ++i) {
    if (i < block.older.size()) {
      const auto& v = block.older[i];
      if (v.cid > kMaxCid) {
        throw std::invalid_argument("older cid exceeds 63 bits");
      }
      fabric::store_u64(out.data() + off, v.cid);
      std::size_t m = std::min(v.payload.size(), payload_bytes);
      std::memcpy(out.data() + off + 8, v.payload.data(), m);
    }
    off += 8 + payload_bytes;
  }
  return out;
}

RecordBlock decode_block(std::span<const std::uint8_t> bytes,
                         std::size_t payload_bytes, std::size_t slots) {
  if (bytes.size() < record_block_size(payload_bytes, slots)) {
    throw std::invalid_argument("short block");
  }
  RecordBlock b;
  auto [locked, cid] = decode_record_header(fabric::load_u64(bytes.data()));
  b.locked = locked;
  b.head_cid = cid;
  b.head_payload.assign(bytes.begin() + 8, bytes.begin() + 8 + payload_bytes);
  std::size_t off = 8 + payload_bytes;
  b.older.resize(slots - 1);
  for (std::size_t i = 0; i + 1 < slots; ++i) {
    b.older[i].cid = fabric::load_u64(bytes.data() + off) & kMaxCid;
    b.older[i].payload.assign(bytes.begin() + off + 8,
                              bytes.begin() + off + 8 + payload_bytes);
    off += 8 + payload_bytes;
  }
  return b;
}

Catalog::Catalog(fabric::Fabric& fabric, std::vector<NodeId> storage_nodes)
    : fabric_(fabric), storage_nodes_(std::move(storage_nodes)) {
  if (storage_nodes_.empty()) {
    throw std::invalid_argument("need at least one storage node");
  }
}

Table& Catalog::create_table(const TableSpec& spec) {
  auto t = std::make_unique<Table>();
  t->spec = spec;
  t->block_size = record_block_size(spec.payload_bytes, spec.slots);
  for (NodeId node : storage_nodes_) {
    t->node_regions.push_back(
        fabric_.register_region(node, spec.capacity_per_node * t->block_size));
    auto alloc = fabric_.register_region(node, 8);
    t->allocator_words.push_back(alloc.at(0));
  }
  tables_.push_back(std::move(t));
  return *tables_.back();
}

Table& Catalog::table(const std::string& name) {
  for (auto& t : tables_) {
    if (t->spec.name == name) {
      return *t;
    }
  }
  throw StoreError("unknown table: " + name);
}

RemoteAddress Catalog::locate(const Table& t, std::uint64_t key) const {
  std::size_t n = storage_nodes_.size();
  std::size_t node_idx = key % n;
  std::uint64_t local = key / n;
  if (local >= t.spec.capacity_per_node) {
    throw StoreError("key outside table capacity");
  }
  return t.node_regions[node_idx].at(local * t.block_size);
}

RecordBlock StoreClient::read_block(const Table& t, std::uint64_t key) {
  auto bytes = session_.read(catalog_.locate(t, key), t.block_size);
  return decode_block(bytes, t.spec.payload_bytes, t.spec.slots);
}

void StoreClient::write_block(const Table& t, std::uint64_t key,
                              const RecordBlock& b) {
  session_.write(catalog_.locate(t, key),
                 encode_block(b, t.spec.payload_bytes, t.spec.slots));
}

std::uint64_t StoreClient::insert_block(const Table& t,
                                        std::span<const std::uint8_t> payload,
                                        std::uint64_t cid) {
  if (payload.size() != t.spec.payload_bytes) {
    throw StoreError("payload width mismatch");
  }
  std::size_t n = catalog_.node_count();
  std::size_t node_idx = insert_rr_++ % n;
  std::uint64_t local = session_.fetch_add(t.allocator_words[node_idx], 1);
  if (local >= t.spec.capacity_per_node) {
    throw StoreError("table region exhausted on node");
  }
  std::uint64_t key = local * n + node_idx;
  RecordBlock b;
  b.head_cid = cid;
  b.head_payload.assign(payload.begin(), payload.end());
  b.older.resize(t.spec.slots - 1);
  write_block(t, key, b);
  return key;
}

}  // namespace namdb::store
