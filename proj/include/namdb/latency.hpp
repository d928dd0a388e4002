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

#ifndef NAMDB_LATENCY_HPP_
#define NAMDB_LATENCY_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace namdb::fabric {

enum class Transport { kRdma, kIpoIb, kIpoEth };

enum class Verb { kRead, kWrite, kSend, kReceive, kCas, kFetchAdd };

enum class Side { kInitiator, kTarget };

const char* to_string(Transport t);
const char* to_string(Verb v);
bool parse_transport(const std::string& s, Transport* out);

inline bool is_one_sided(Verb v) {
  return v == Verb::kRead || v == Verb::kWrite || v == Verb::kCas ||
         v == Verb::kFetchAdd;
}

// Anchored latency and per-message CPU-cycle model.
//
// Latency is interpolated log-log between anchor points (straight segments
// on the usual size/latency log-log plot), is exact at every anchor, flat
// below the first anchor and extended with the last segment's slope above
// the final one. Verb classes share tables: WRITE and SEND on RDMA use the
// write table; READ and the 8-byte atomics use the read table; the TCP
// transports have a single table.
//
// Cycles per message: constant on RDMA (initiator always pays, the target
// pays only for RECEIVE); on the TCP stacks both sides pay a flat cost up
// to the TCP window and a cost linear in size beyond it.
struct LatencyModel {
  struct Anchor {
    double bytes;
    double seconds;
  };

  std::vector<Anchor> rdma_write;  // WRITE / SEND
  std::vector<Anchor> rdma_read;   // READ / CAS / FETCH_ADD
  std::vector<Anchor> ipoib;
  std::vector<Anchor> ipoeth;

  double rdma_cycles = 450.0;
  double ipoeth_cycles = 7544.0;
  double ipoib_cycles = 13264.0;
  double ipoeth_tcp_window = 1488.0;
  double ipoib_tcp_window = 21888.0;
  double cycles_per_second = 2.2e9;

  static LatencyModel defaults();

  // Full-operation latency in seconds (for two-sided verbs: one-way delay).
  double latency(Transport t, Verb v, std::size_t bytes) const;

  // Modeled CPU cycles charged to one side for one message/verb.
  double cycles(Transport t, Verb v, std::size_t bytes, Side side) const;

  double seconds_per_cycle() const { return 1.0 / cycles_per_second; }
};

}  // namespace namdb::fabric

#endif  // NAMDB_LATENCY_HPP_
