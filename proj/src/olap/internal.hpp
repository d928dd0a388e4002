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

#ifndef NAMDB_SRC_OLAP_INTERNAL_HPP_
#define NAMDB_SRC_OLAP_INTERNAL_HPP_

#include <barrier>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "namdb/fabric.hpp"
#include "namdb/olap.hpp"

namespace namdb::olap::internal {

// Runs body(worker) on p threads and rethrows the first worker exception.
inline void run_workers(std::size_t p,
                        const std::function<void(std::size_t)>& body) {
  std::vector<std::thread> threads;
  std::mutex mu;
  std::exception_ptr first;
  for (std::size_t w = 0; w < p; ++w) {
    threads.emplace_back([&, w] {
      try {
        body(w);
      } catch (...) {
        std::lock_guard lk(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

inline std::size_t tuple_record_len(const Relation& rel) {
  return rel.tuple_width;
}

inline void encode_tuple(std::uint8_t* out, std::uint64_t key,
                         std::uint64_t payload, bool has_payload) {
  fabric::store_u64(out, key);
  if (has_payload) {
    fabric::store_u64(out + 8, payload);
  }
}

inline void decode_tuples(const std::uint8_t* data, std::size_t len,
                          bool has_payload, TupleVec* out) {
  std::size_t rec = has_payload ? 16 : 8;
  for (std::size_t off = 0; off + rec <= len; off += rec) {
    std::uint64_t key = fabric::load_u64(data + off);
    std::uint64_t payload = has_payload ? fabric::load_u64(data + off + 8) : 0;
    out->append(key, payload, has_payload);
  }
}

inline std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// Hash build/probe over one pair of tuple batches (defined in relation.cpp).
void join_tuples(const TupleVec& r, const TupleVec& s, std::vector<Match>* out);

}  // namespace namdb::olap::internal

#endif  // NAMDB_SRC_OLAP_INTERNAL_HPP_
