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

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "namdb/kernels.hpp"
#include "namdb/olap.hpp"
#include "olap/internal.hpp"

namespace namdb::olap {

std::uint64_t Relation::total_tuples() const {
  std::uint64_t n = 0;
  for (const auto& p : parts) {
    n += p.keys.size();
  }
  return n;
}

void TupleVec::append(std::uint64_t key, std::uint64_t payload,
                      bool has_payload) {
  keys.push_back(key);
  if (has_payload) {
    payloads.push_back(payload);
  }
}

// ---------------------------------------------------------------------------
// Bloom filter

BloomFilter::BloomFilter(std::uint64_t expected_n, double eps,
                         std::uint64_t seed)
    : seed_(seed) {
  if (eps <= 0.0 || eps >= 1.0) {
    throw std::invalid_argument("false-positive rate must be in (0,1)");
  }
  double n = static_cast<double>(expected_n == 0 ? 1 : expected_n);
  double ln2 = std::log(2.0);
  m_bits_ = static_cast<std::uint64_t>(std::ceil(-n * std::log(eps) / (ln2 * ln2)));
  if (m_bits_ < 64) {
    m_bits_ = 64;
  }
  k_ = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(
             std::lround(static_cast<double>(m_bits_) / n * ln2)));
  bits_.assign((m_bits_ + 7) / 8, 0);
}

void BloomFilter::insert(std::uint64_t key) {
  std::uint64_t h1 = kernels::hash64(key, seed_);
  std::uint64_t h2 = kernels::hash64(key, seed_ ^ 0xA5A5A5A5DEADBEEFULL) | 1;
  for (std::uint32_t i = 0; i < k_; ++i) {
    std::uint64_t bit = (h1 + i * h2) % m_bits_;
    bits_[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  }
}

bool BloomFilter::contains(std::uint64_t key) const {
  std::uint64_t h1 = kernels::hash64(key, seed_);
  std::uint64_t h2 = kernels::hash64(key, seed_ ^ 0xA5A5A5A5DEADBEEFULL) | 1;
  for (std::uint32_t i = 0; i < k_; ++i) {
    std::uint64_t bit = (h1 + i * h2) % m_bits_;
    if ((bits_[bit / 8] & (1u << (bit % 8))) == 0) {
      return false;
    }
  }
  return true;
}

void BloomFilter::merge_bytes(const std::vector<std::uint8_t>& other) {
  if (other.size() != bits_.size()) {
    throw std::invalid_argument("merging differently sized filters");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    bits_[i] |= other[i];
  }
}

// ---------------------------------------------------------------------------
// Local radix join

namespace {

constexpr std::uint64_t kBlockSeed = 0xB10C5EED;

// Block build/probe shared by the local radix join and the RDMA radix
// join's per-partition phase.
void join_block(const TupleVec& r, const TupleVec& s,
                std::vector<Match>* out) {
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> build;
  build.reserve(r.size() * 2 + 1);
  bool rp = !r.payloads.empty();
  for (std::size_t i = 0; i < r.keys.size(); ++i) {
    build[r.keys[i]].push_back(rp ? r.payloads[i] : 0);
  }
  bool sp = !s.payloads.empty();
  for (std::size_t i = 0; i < s.keys.size(); ++i) {
    auto it = build.find(s.keys[i]);
    if (it == build.end()) {
      continue;
    }
    for (std::uint64_t rpayload : it->second) {
      out->push_back({s.keys[i], rpayload, sp ? s.payloads[i] : 0});
    }
  }
}

}  // namespace

namespace internal {
void join_tuples(const TupleVec& r, const TupleVec& s, std::vector<Match>* out) {
  join_block(r, s, out);
}
}  // namespace internal

std::vector<Match> local_radix_join(const TupleVec& r, const TupleVec& s,
                                    const OlapConfig& cfg) {
  std::size_t total_bytes = (r.size() + s.size()) * 16;
  std::size_t blocks = internal::next_pow2(
      std::max<std::size_t>(1, total_bytes / cfg.cache_block_bytes));
  blocks = std::min<std::size_t>(blocks, 4096);
  std::vector<Match> out;
  if (blocks == 1) {
    join_block(r, s, &out);
    return out;
  }

  auto partition = [&](const TupleVec& in) {
    std::vector<TupleVec> parts(blocks);
    std::vector<std::uint64_t> hashes(in.size());
    kernels::hash64_batch(in.keys.data(), hashes.data(), in.size(),
                          kBlockSeed);
    bool hp = !in.payloads.empty();
    for (std::size_t i = 0; i < in.size(); ++i) {
      parts[hashes[i] & (blocks - 1)].append(in.keys[i],
                                             hp ? in.payloads[i] : 0, hp);
    }
    return parts;
  };
  auto r_parts = partition(r);
  auto s_parts = partition(s);
  for (std::size_t b = 0; b < blocks; ++b) {
    join_block(r_parts[b], s_parts[b], &out);
  }
  return out;
}

}  // namespace namdb::olap
