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

#ifndef NAMDB_FABRIC_HPP_
#define NAMDB_FABRIC_HPP_

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "namdb/latency.hpp"

// In-process simulated RDMA fabric. Verbs execute functionally (and
// inline, under real thread concurrency) against registered byte regions
// on storage nodes; time is modeled, not measured. Every session carries a
// virtual clock that advances by the latency-model cost of awaited verbs,
// and every node carries a virtual CPU that serializes two-sided message
// processing, so modeled latencies reflect both wire delays and
// per-message CPU load.

namespace namdb::fabric {

using NodeId = std::uint32_t;

struct RemoteAddress {
  NodeId node = 0;
  std::uint64_t offset = 0;
};

// Handle to a registered region; the bytes live inside the fabric and are
// reachable only through verbs.
struct MemoryRegion {
  NodeId node = 0;
  std::uint64_t base = 0;
  std::uint64_t length = 0;

  RemoteAddress at(std::uint64_t off) const { return {node, base + off}; }
};

enum class CompletionStatus { kOk, kAccessError, kProtocolError };

struct Completion {
  std::uint32_t qp_id = 0;
  std::uint64_t seq = 0;
  Verb verb = Verb::kRead;
  CompletionStatus status = CompletionStatus::kOk;
  // READ data, previous value for atomics, or the delivered payload for a
  // RECEIVE completion.
  std::vector<std::uint8_t> data;
  // Modeled completion time (seconds since fabric start).
  double vtime = 0.0;
};

class CompletionQueue {
 public:
  std::vector<Completion> poll(std::size_t max);
  // Blocks until at least one completion is available or the timeout
  // elapses; empty result means timeout.
  std::optional<Completion> poll_blocking(double timeout_seconds);
  void push(Completion c);
  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Completion> queue_;
};

struct FabricError : std::runtime_error {
  explicit FabricError(const std::string& what) : std::runtime_error(what) {}
};

constexpr std::size_t kNumTransports = 3;
constexpr std::size_t kNumVerbs = 6;

// Monotone counters per node and transport plus per-session modeled
// latency. One-sided verbs charge zero target-side cycles by construction.
struct MetricsSnapshot {
  struct PerNode {
    std::array<std::array<std::uint64_t, kNumVerbs>, kNumTransports> verbs{};
    std::array<std::uint64_t, kNumTransports> bytes_out{};
    std::array<std::uint64_t, kNumTransports> bytes_in{};
    std::array<double, kNumTransports> cycles_initiator{};
    std::array<double, kNumTransports> cycles_target{};

    std::uint64_t verb_count(Transport t, Verb v) const {
      return verbs[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)];
    }
    double cycles_total() const;
  };
  std::vector<PerNode> nodes;
  // session id -> accumulated modeled latency (virtual clock)
  std::vector<double> session_clocks;

  std::uint64_t total_verbs(Verb v) const;
  std::uint64_t total_bytes_out() const;
  double node_cycles(NodeId n) const { return nodes.at(n).cycles_total(); }
};

MetricsSnapshot diff(const MetricsSnapshot& before,
                     const MetricsSnapshot& after);

class Fabric;
class Session;

// A queue pair. One-sided queue pairs target a storage node's memory;
// two-sided queue pairs are created in connected pairs and carry
// SEND/RECEIVE traffic. WQEs are processed in FIFO order per queue pair.
class Qp {
 public:
  struct Ticket {
    std::uint64_t seq = 0;
    double complete_at = 0.0;
    CompletionStatus status = CompletionStatus::kOk;
  };

  std::uint32_t id() const { return id_; }
  Transport transport() const { return transport_; }
  NodeId target_node() const { return target_node_; }

  Ticket post_read(RemoteAddress remote, std::size_t length, bool signaled);
  Ticket post_write(RemoteAddress remote, std::span<const std::uint8_t> data,
                    bool signaled);
  Ticket post_cas(RemoteAddress remote, std::uint64_t expected,
                  std::uint64_t swap, bool signaled = true);
  Ticket post_fetch_add(RemoteAddress remote, std::uint64_t delta,
                        bool signaled = true);
  Ticket post_send(std::span<const std::uint8_t> data, bool signaled);
  // Posts a receive slot; the matching completion appears on the owning
  // session's receive queue when a peer SEND consumes it.
  void post_receive();

 private:
  friend class Fabric;
  friend class Session;

  std::uint32_t id_ = 0;
  Transport transport_ = Transport::kRdma;
  NodeId target_node_ = 0;
  Session* owner_ = nullptr;
  Qp* peer_ = nullptr;  // two-sided only
  Fabric* fabric_ = nullptr;

  std::mutex mu_;
  std::uint64_t next_seq_ = 1;
  std::deque<std::uint64_t> receive_tokens_;  // seq numbers of posted receives
};

// A client context: owns its queue pairs, a send and a receive completion
// queue, and a virtual clock. Sessions are not thread-safe; use one per
// worker thread.
class Session {
 public:
  ~Session();

  std::uint32_t id() const { return id_; }
  NodeId node() const { return node_; }
  double clock() const { return clock_; }
  void advance_clock(double vtime) {
    if (vtime > clock_) clock_ = vtime;
  }

  CompletionQueue& send_cq() { return send_cq_; }
  CompletionQueue& recv_cq() { return recv_cq_; }

  // Lazily created one-sided queue pair to a storage node.
  Qp& qp_to(NodeId node);

  // Awaited one-sided verbs; advance the virtual clock and throw
  // FabricError on error completions.
  std::vector<std::uint8_t> read(RemoteAddress a, std::size_t length);
  void write(RemoteAddress a, std::span<const std::uint8_t> data);
  void write_unsignaled(RemoteAddress a, std::span<const std::uint8_t> data);
  std::uint64_t cas(RemoteAddress a, std::uint64_t expected,
                    std::uint64_t swap);
  std::uint64_t fetch_add(RemoteAddress a, std::uint64_t delta);

  // Batched posting: all verbs are posted back to back (parallel round
  // trips), then awaited together; the clock advances to the latest
  // completion. Returns completions in posting order.
  struct BatchVerb {
    Verb verb;
    RemoteAddress remote;
    std::size_t length = 0;                // READ
    std::vector<std::uint8_t> data;        // WRITE
    std::uint64_t expected = 0, value = 0;  // CAS / FETCH_ADD
  };
  std::vector<Completion> run_batch(std::vector<BatchVerb> verbs);

  // Two-sided helpers.
  void send(Qp& qp, std::span<const std::uint8_t> data, bool signaled = false);
  std::optional<Completion> recv_blocking(double timeout_seconds);

 private:
  friend class Fabric;

  Fabric* fabric_ = nullptr;
  std::uint32_t id_ = 0;
  NodeId node_ = 0;
  double clock_ = 0.0;
  CompletionQueue send_cq_;
  CompletionQueue recv_cq_;
  std::mutex qps_mu_;
  std::map<NodeId, std::unique_ptr<Qp>> one_sided_;
  std::vector<std::unique_ptr<Qp>> channels_;

  Completion await(const Qp::Ticket& t);
};

class Fabric {
 public:
  explicit Fabric(std::uint32_t num_nodes,
                  LatencyModel model = LatencyModel::defaults());
  ~Fabric();

  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  std::uint32_t num_nodes() const { return num_nodes_; }
  const LatencyModel& model() const { return model_; }

  // Registers a zero-initialized region; offsets are bump-allocated and
  // never overlap. length must be positive.
  MemoryRegion register_region(NodeId node, std::uint64_t length);
  // Registration at a caller-chosen base; rejects overlap with any
  // existing region.
  MemoryRegion register_region_at(NodeId node, std::uint64_t base,
                                  std::uint64_t length);

  std::unique_ptr<Session> create_session(NodeId node);

  // Connected two-sided queue pair between two sessions. Messages between
  // sessions on the same node travel loopback: zero wire latency, normal
  // per-message CPU cycles.
  std::pair<Qp*, Qp*> create_channel(Session& a, Session& b,
                                     Transport transport);

  MetricsSnapshot snapshot() const;

 private:
  friend class Qp;
  friend class Session;

  struct Region {
    std::uint64_t base = 0;
    std::uint64_t length = 0;
    std::unique_ptr<std::uint8_t[]> bytes;
    std::shared_mutex mu;
  };

  struct NodeState {
    std::shared_mutex regions_mu;
    std::map<std::uint64_t, std::unique_ptr<Region>> regions;
    std::uint64_t bump = 0;
    std::mutex vtime_mu;
    double busy_until = 0.0;

    std::array<std::array<std::atomic<std::uint64_t>, kNumVerbs>,
               kNumTransports>
        verbs{};
    std::array<std::atomic<std::uint64_t>, kNumTransports> bytes_out{};
    std::array<std::atomic<std::uint64_t>, kNumTransports> bytes_in{};
    std::array<std::atomic<double>, kNumTransports> cycles_initiator{};
    std::array<std::atomic<double>, kNumTransports> cycles_target{};
  };

  Region* resolve(NodeId node, std::uint64_t offset, std::uint64_t length);

  Qp::Ticket execute_one_sided(Qp& qp, Verb verb, RemoteAddress remote,
                               std::size_t length,
                               std::span<const std::uint8_t> data,
                               std::uint64_t expected, std::uint64_t value,
                               bool signaled);
  Qp::Ticket execute_send(Qp& qp, std::span<const std::uint8_t> data,
                          bool signaled);

  void count_verb(NodeId initiator, Transport t, Verb v);
  void charge_initiator(Session& s, Transport t, Verb v, std::size_t bytes);
  double charge_target(NodeId node, Transport t, Verb v, std::size_t bytes,
                       double arrival);

  std::uint32_t num_nodes_;
  LatencyModel model_;
  std::vector<std::unique_ptr<NodeState>> nodes_;

  void forget_session(Session* s);

  mutable std::mutex registry_mu_;
  std::vector<Session*> sessions_;
  std::vector<double> retired_clocks_;  // final clocks of destroyed sessions
  std::uint32_t next_qp_id_ = 1;
  std::uint32_t next_session_id_ = 0;
};

// Little-endian 64-bit load/store used for all words in fabric memory.
std::uint64_t load_u64(const std::uint8_t* p);
void store_u64(std::uint8_t* p, std::uint64_t v);

}  // namespace namdb::fabric

#endif  // NAMDB_FABRIC_HPP_
