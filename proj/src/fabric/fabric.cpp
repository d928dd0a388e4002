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

#include "namdb/fabric.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cstring>

namespace namdb::fabric {

std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

void store_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

// ---------------------------------------------------------------------------
// CompletionQueue

std::vector<Completion> CompletionQueue::poll(std::size_t max) {
  std::lock_guard lk(mu_);
  std::vector<Completion> out;
  while (!queue_.empty() && out.size() < max) {
    out.push_back(std::move(queue_.front()));
    queue_.pop_front();
  }
  return out;
}

std::optional<Completion> CompletionQueue::poll_blocking(
    double timeout_seconds) {
  std::unique_lock lk(mu_);
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(timeout_seconds));
  if (!cv_.wait_until(lk, deadline, [&] { return !queue_.empty(); })) {
    return std::nullopt;
  }
  Completion c = std::move(queue_.front());
  queue_.pop_front();
  return c;
}

void CompletionQueue::push(Completion c) {
  {
    std::lock_guard lk(mu_);
    queue_.push_back(std::move(c));
  }
  cv_.notify_one();
}

std::size_t CompletionQueue::pending() const {
  std::lock_guard lk(mu_);
  return queue_.size();
}

// ---------------------------------------------------------------------------
// Metrics

double MetricsSnapshot::PerNode::cycles_total() const {
  double total = 0;
  for (std::size_t t = 0; t < kNumTransports; ++t) {
    total += cycles_initiator[t] + cycles_target[t];
  }
  return total;
}

std::uint64_t MetricsSnapshot::total_verbs(Verb v) const {
  std::uint64_t total = 0;
  for (const auto& n : nodes) {
    for (std::size_t t = 0; t < kNumTransports; ++t) {
      total += n.verbs[t][static_cast<std::size_t>(v)];
    }
  }
  return total;
}

std::uint64_t MetricsSnapshot::total_bytes_out() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes) {
    for (std::size_t t = 0; t < kNumTransports; ++t) {
      total += n.bytes_out[t];
    }
  }
  return total;
}

MetricsSnapshot diff(const MetricsSnapshot& before,
                     const MetricsSnapshot& after) {
  MetricsSnapshot d = after;
  for (std::size_t n = 0; n < d.nodes.size() && n < before.nodes.size(); ++n) {
    auto& dn = d.nodes[n];
    const auto& bn = before.nodes[n];
    for (std::size_t t = 0; t < kNumTransports; ++t) {
      for (std::size_t v = 0; v < kNumVerbs; ++v) {
        dn.verbs[t][v] -= bn.verbs[t][v];
      }
      dn.bytes_out[t] -= bn.bytes_out[t];
      dn.bytes_in[t] -= bn.bytes_in[t];
      dn.cycles_initiator[t] -= bn.cycles_initiator[t];
      dn.cycles_target[t] -= bn.cycles_target[t];
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Qp posting surface

Qp::Ticket Qp::post_read(RemoteAddress remote, std::size_t length,
                         bool signaled) {
  return fabric_->execute_one_sided(*this, Verb::kRead, remote, length, {}, 0,
                                    0, signaled);
}

Qp::Ticket Qp::post_write(RemoteAddress remote,
                          std::span<const std::uint8_t> data, bool signaled) {
  return fabric_->execute_one_sided(*this, Verb::kWrite, remote, data.size(),
                                    data, 0, 0, signaled);
}

Qp::Ticket Qp::post_cas(RemoteAddress remote, std::uint64_t expected,
                        std::uint64_t swap, bool signaled) {
  return fabric_->execute_one_sided(*this, Verb::kCas, remote, 8, {}, expected,
                                    swap, signaled);
}

Qp::Ticket Qp::post_fetch_add(RemoteAddress remote, std::uint64_t delta,
                              bool signaled) {
  return fabric_->execute_one_sided(*this, Verb::kFetchAdd, remote, 8, {}, 0,
                                    delta, signaled);
}

Qp::Ticket Qp::post_send(std::span<const std::uint8_t> data, bool signaled) {
  return fabric_->execute_send(*this, data, signaled);
}

void Qp::post_receive() {
  std::lock_guard lk(mu_);
  receive_tokens_.push_back(next_seq_++);
}

// ---------------------------------------------------------------------------
// Session

Session::~Session() {
  if (fabric_ != nullptr) {
    fabric_->forget_session(this);
  }
}

Qp& Session::qp_to(NodeId node) {
  std::lock_guard lk(qps_mu_);
  auto it = one_sided_.find(node);
  if (it == one_sided_.end()) {
    auto qp = std::make_unique<Qp>();
    qp->transport_ = Transport::kRdma;
    qp->target_node_ = node;
    qp->owner_ = this;
    qp->fabric_ = fabric_;
    {
      std::lock_guard rk(fabric_->registry_mu_);
      qp->id_ = fabric_->next_qp_id_++;
    }
    it = one_sided_.emplace(node, std::move(qp)).first;
  }
  return *it->second;
}

Completion Session::await(const Qp::Ticket& t) {
  // Verbs execute inline, so the completion is already queued.
  auto got = send_cq_.poll(1);
  if (got.empty()) {
    throw FabricError("missing completion for awaited verb");
  }
  Completion c = std::move(got.front());
  if (c.seq != t.seq) {
    throw FabricError("completion out of order on session queue");
  }
  advance_clock(c.vtime);
  return c;
}

std::vector<std::uint8_t> Session::read(RemoteAddress a, std::size_t length) {
  auto t = qp_to(a.node).post_read(a, length, true);
  Completion c = await(t);
  if (c.status != CompletionStatus::kOk) {
    throw FabricError("rdma_read failed");
  }
  return std::move(c.data);
}

void Session::write(RemoteAddress a, std::span<const std::uint8_t> data) {
  auto t = qp_to(a.node).post_write(a, data, true);
  Completion c = await(t);
  if (c.status != CompletionStatus::kOk) {
    throw FabricError("rdma_write failed");
  }
}

void Session::write_unsignaled(RemoteAddress a,
                               std::span<const std::uint8_t> data) {
  auto t = qp_to(a.node).post_write(a, data, false);
  if (t.status != CompletionStatus::kOk) {
    send_cq_.poll(1);  // drain the error completion
    throw FabricError("rdma_write failed");
  }
}

std::uint64_t Session::cas(RemoteAddress a, std::uint64_t expected,
                           std::uint64_t swap) {
  auto t = qp_to(a.node).post_cas(a, expected, swap);
  Completion c = await(t);
  if (c.status != CompletionStatus::kOk) {
    throw FabricError("rdma_cas failed");
  }
  return load_u64(c.data.data());
}

std::uint64_t Session::fetch_add(RemoteAddress a, std::uint64_t delta) {
  auto t = qp_to(a.node).post_fetch_add(a, delta);
  Completion c = await(t);
  if (c.status != CompletionStatus::kOk) {
    throw FabricError("rdma_fetch_add failed");
  }
  return load_u64(c.data.data());
}

std::vector<Completion> Session::run_batch(std::vector<BatchVerb> verbs) {
  std::vector<Qp::Ticket> tickets;
  tickets.reserve(verbs.size());
  for (const auto& v : verbs) {
    Qp& qp = qp_to(v.remote.node);
    switch (v.verb) {
      case Verb::kRead:
        tickets.push_back(qp.post_read(v.remote, v.length, true));
        break;
      case Verb::kWrite:
        tickets.push_back(qp.post_write(v.remote, v.data, true));
        break;
      case Verb::kCas:
        tickets.push_back(qp.post_cas(v.remote, v.expected, v.value));
        break;
      case Verb::kFetchAdd:
        tickets.push_back(qp.post_fetch_add(v.remote, v.value));
        break;
      default:
        throw std::invalid_argument("unsupported verb in batch");
    }
  }
  std::vector<Completion> out;
  out.reserve(verbs.size());
  for (const auto& t : tickets) {
    out.push_back(await(t));
  }
  return out;
}

void Session::send(Qp& qp, std::span<const std::uint8_t> data, bool signaled) {
  auto t = qp.post_send(data, signaled);
  if (signaled) {
    Completion c = await(t);
    if (c.status != CompletionStatus::kOk) {
      throw FabricError("send failed: no receive posted");
    }
  } else if (t.status != CompletionStatus::kOk) {
    send_cq_.poll(1);
    throw FabricError("send failed: no receive posted");
  }
}

std::optional<Completion> Session::recv_blocking(double timeout_seconds) {
  auto c = recv_cq_.poll_blocking(timeout_seconds);
  if (c) {
    advance_clock(c->vtime);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Fabric

Fabric::Fabric(std::uint32_t num_nodes, LatencyModel model)
    : num_nodes_(num_nodes), model_(std::move(model)) {
  nodes_.reserve(num_nodes_);
  for (std::uint32_t i = 0; i < num_nodes_; ++i) {
    nodes_.push_back(std::make_unique<NodeState>());
  }
}

Fabric::~Fabric() = default;

MemoryRegion Fabric::register_region(NodeId node, std::uint64_t length) {
  if (node >= num_nodes_) {
    throw std::invalid_argument("unknown node");
  }
  if (length == 0) {
    throw std::invalid_argument("empty region rejected");
  }
  NodeState& ns = *nodes_[node];
  std::unique_lock lk(ns.regions_mu);
  std::uint64_t base = (ns.bump + 63) & ~std::uint64_t{63};
  ns.bump = base + length;
  auto region = std::make_unique<Region>();
  region->base = base;
  region->length = length;
  region->bytes = std::make_unique<std::uint8_t[]>(length);
  std::memset(region->bytes.get(), 0, length);
  ns.regions.emplace(base, std::move(region));
  return {node, base, length};
}

MemoryRegion Fabric::register_region_at(NodeId node, std::uint64_t base,
                                        std::uint64_t length) {
  if (node >= num_nodes_) {
    throw std::invalid_argument("unknown node");
  }
  if (length == 0) {
    throw std::invalid_argument("empty region rejected");
  }
  NodeState& ns = *nodes_[node];
  std::unique_lock lk(ns.regions_mu);
  for (const auto& [b, r] : ns.regions) {
    if (b < base + length && base < b + r->length) {
      throw std::invalid_argument("region overlaps an existing registration");
    }
  }
  auto region = std::make_unique<Region>();
  region->base = base;
  region->length = length;
  region->bytes = std::make_unique<std::uint8_t[]>(length);
  std::memset(region->bytes.get(), 0, length);
  ns.regions.emplace(base, std::move(region));
  ns.bump = std::max(ns.bump, base + length);
  return {node, base, length};
}

std::unique_ptr<Session> Fabric::create_session(NodeId node) {
  if (node >= num_nodes_) {
    throw std::invalid_argument("unknown node");
  }
  auto s = std::unique_ptr<Session>(new Session());
  s->fabric_ = this;
  s->node_ = node;
  std::lock_guard lk(registry_mu_);
  s->id_ = next_session_id_++;
  sessions_.push_back(s.get());
  return s;
}

std::pair<Qp*, Qp*> Fabric::create_channel(Session& a, Session& b,
                                           Transport transport) {
  auto qa = std::make_unique<Qp>();
  auto qb = std::make_unique<Qp>();
  qa->transport_ = qb->transport_ = transport;
  qa->owner_ = &a;
  qb->owner_ = &b;
  qa->target_node_ = b.node();
  qb->target_node_ = a.node();
  qa->fabric_ = qb->fabric_ = this;
  qa->peer_ = qb.get();
  qb->peer_ = qa.get();
  {
    std::lock_guard lk(registry_mu_);
    qa->id_ = next_qp_id_++;
    qb->id_ = next_qp_id_++;
  }
  Qp* pa = qa.get();
  Qp* pb = qb.get();
  {
    std::lock_guard lk(a.qps_mu_);
    a.channels_.push_back(std::move(qa));
  }
  {
    std::lock_guard lk(b.qps_mu_);
    b.channels_.push_back(std::move(qb));
  }
  return {pa, pb};
}

Fabric::Region* Fabric::resolve(NodeId node, std::uint64_t offset,
                                std::uint64_t length) {
  if (node >= num_nodes_ || length == 0) {
    return nullptr;
  }
  NodeState& ns = *nodes_[node];
  std::shared_lock lk(ns.regions_mu);
  auto it = ns.regions.upper_bound(offset);
  if (it == ns.regions.begin()) {
    return nullptr;
  }
  --it;
  Region* r = it->second.get();
  if (offset < r->base || offset + length > r->base + r->length) {
    return nullptr;
  }
  return r;
}

void Fabric::count_verb(NodeId node, Transport t, Verb v) {
  nodes_[node]->verbs[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)]
      .fetch_add(1, std::memory_order_relaxed);
}

void Fabric::charge_initiator(Session& s, Transport t, Verb v,
                              std::size_t bytes) {
  double c = model_.cycles(t, v, bytes, Side::kInitiator);
  nodes_[s.node()]->cycles_initiator[static_cast<std::size_t>(t)].fetch_add(
      c, std::memory_order_relaxed);
  s.advance_clock(s.clock() + c * model_.seconds_per_cycle());
}

double Fabric::charge_target(NodeId node, Transport t, Verb v,
                             std::size_t bytes, double arrival) {
  double c = model_.cycles(t, v, bytes, Side::kTarget);
  nodes_[node]->cycles_target[static_cast<std::size_t>(t)].fetch_add(
      c, std::memory_order_relaxed);
  if (c == 0.0) {
    return arrival;
  }
  // Two-sided processing serializes on the target node's virtual CPU.
  NodeState& ns = *nodes_[node];
  std::lock_guard lk(ns.vtime_mu);
  double start = std::max(ns.busy_until, arrival);
  ns.busy_until = start + c * model_.seconds_per_cycle();
  return ns.busy_until;
}

Qp::Ticket Fabric::execute_one_sided(Qp& qp, Verb verb, RemoteAddress remote,
                                     std::size_t length,
                                     std::span<const std::uint8_t> data,
                                     std::uint64_t expected,
                                     std::uint64_t value, bool signaled) {
  if (qp.transport_ != Transport::kRdma) {
    throw std::logic_error("one-sided verbs require an RDMA queue pair");
  }
  Session& s = *qp.owner_;
  std::uint64_t seq;
  {
    std::lock_guard lk(qp.mu_);
    seq = qp.next_seq_++;
  }
  count_verb(s.node(), Transport::kRdma, verb);
  charge_initiator(s, Transport::kRdma, verb, length);
  double post_time = s.clock();

  Completion c;
  c.qp_id = qp.id();
  c.seq = seq;
  c.verb = verb;

  bool is_atomic = verb == Verb::kCas || verb == Verb::kFetchAdd;
  Region* region = resolve(remote.node, remote.offset, length);
  if (region == nullptr || (is_atomic && remote.offset % 8 != 0)) {
    c.status = CompletionStatus::kAccessError;
    c.vtime = post_time;
    s.send_cq().push(std::move(c));  // error completions are always delivered
    return {seq, post_time, CompletionStatus::kAccessError};
  }

  auto* node_metrics = nodes_[remote.node].get();
  std::uint8_t* p = region->bytes.get() + (remote.offset - region->base);
  switch (verb) {
    case Verb::kRead: {
      std::shared_lock lk(region->mu);
      c.data.assign(p, p + length);
      nodes_[s.node()]->bytes_in[0].fetch_add(length,
                                              std::memory_order_relaxed);
      node_metrics->bytes_out[0].fetch_add(length, std::memory_order_relaxed);
      break;
    }
    case Verb::kWrite: {
      std::unique_lock lk(region->mu);
      std::memcpy(p, data.data(), data.size());
      nodes_[s.node()]->bytes_out[0].fetch_add(length,
                                               std::memory_order_relaxed);
      node_metrics->bytes_in[0].fetch_add(length, std::memory_order_relaxed);
      break;
    }
    case Verb::kCas: {
      std::unique_lock lk(region->mu);
      std::uint64_t old = load_u64(p);
      if (old == expected) {
        store_u64(p, value);
      }
      c.data.resize(8);
      store_u64(c.data.data(), old);
      nodes_[s.node()]->bytes_out[0].fetch_add(8, std::memory_order_relaxed);
      node_metrics->bytes_in[0].fetch_add(8, std::memory_order_relaxed);
      break;
    }
    case Verb::kFetchAdd: {
      std::unique_lock lk(region->mu);
      std::uint64_t old = load_u64(p);
      store_u64(p, old + value);
      c.data.resize(8);
      store_u64(c.data.data(), old);
      nodes_[s.node()]->bytes_out[0].fetch_add(8, std::memory_order_relaxed);
      node_metrics->bytes_in[0].fetch_add(8, std::memory_order_relaxed);
      break;
    }
    default:
      throw std::logic_error("not a one-sided verb");
  }

  double complete_at =
      post_time + model_.latency(Transport::kRdma, verb, length);
  c.status = CompletionStatus::kOk;
  c.vtime = complete_at;
  if (signaled) {
    s.send_cq().push(std::move(c));
  }
  return {seq, complete_at, CompletionStatus::kOk};
}

Qp::Ticket Fabric::execute_send(Qp& qp, std::span<const std::uint8_t> data,
                                bool signaled) {
  if (qp.peer_ == nullptr) {
    throw std::logic_error("send requires a connected queue pair");
  }
  Session& s = *qp.owner_;
  std::uint64_t seq;
  {
    std::lock_guard lk(qp.mu_);
    seq = qp.next_seq_++;
  }
  Transport t = qp.transport_;
  count_verb(s.node(), t, Verb::kSend);
  charge_initiator(s, t, Verb::kSend, data.size());
  double post_time = s.clock();

  Qp& peer = *qp.peer_;
  std::uint64_t recv_seq = 0;
  bool have_token = false;
  {
    std::lock_guard lk(peer.mu_);
    if (!peer.receive_tokens_.empty()) {
      recv_seq = peer.receive_tokens_.front();
      peer.receive_tokens_.pop_front();
      have_token = true;
    }
  }

  if (!have_token) {
    Completion c;
    c.qp_id = qp.id();
    c.seq = seq;
    c.verb = Verb::kSend;
    c.status = CompletionStatus::kProtocolError;
    c.vtime = post_time;
    s.send_cq().push(std::move(c));
    return {seq, post_time, CompletionStatus::kProtocolError};
  }

  Session& receiver = *peer.owner_;
  NodeId dst = receiver.node();
  // Same-node channels are loopback: no wire latency.
  double wire = dst == s.node() ? 0.0 : model_.latency(t, Verb::kSend, data.size());
  double arrival = post_time + wire;
  count_verb(dst, t, Verb::kReceive);
  double deliver_at = charge_target(dst, t, Verb::kReceive, data.size(), arrival);

  nodes_[s.node()]->bytes_out[static_cast<std::size_t>(t)].fetch_add(
      data.size(), std::memory_order_relaxed);
  nodes_[dst]->bytes_in[static_cast<std::size_t>(t)].fetch_add(
      data.size(), std::memory_order_relaxed);

  Completion rc;
  rc.qp_id = peer.id();
  rc.seq = recv_seq;
  rc.verb = Verb::kReceive;
  rc.status = CompletionStatus::kOk;
  rc.data.assign(data.begin(), data.end());
  rc.vtime = deliver_at;
  receiver.recv_cq().push(std::move(rc));

  if (signaled) {
    Completion sc;
    sc.qp_id = qp.id();
    sc.seq = seq;
    sc.verb = Verb::kSend;
    sc.status = CompletionStatus::kOk;
    sc.vtime = arrival;
    s.send_cq().push(std::move(sc));
  }
  return {seq, arrival, CompletionStatus::kOk};
}

void Fabric::forget_session(Session* s) {
  std::lock_guard lk(registry_mu_);
  if (retired_clocks_.size() <= s->id()) {
    retired_clocks_.resize(s->id() + 1, 0.0);
  }
  retired_clocks_[s->id()] = s->clock();
  std::erase(sessions_, s);
}

MetricsSnapshot Fabric::snapshot() const {
  MetricsSnapshot snap;
  snap.nodes.resize(num_nodes_);
  for (std::uint32_t n = 0; n < num_nodes_; ++n) {
    const NodeState& ns = *nodes_[n];
    auto& out = snap.nodes[n];
    for (std::size_t t = 0; t < kNumTransports; ++t) {
      for (std::size_t v = 0; v < kNumVerbs; ++v) {
        out.verbs[t][v] = ns.verbs[t][v].load(std::memory_order_relaxed);
      }
      out.bytes_out[t] = ns.bytes_out[t].load(std::memory_order_relaxed);
      out.bytes_in[t] = ns.bytes_in[t].load(std::memory_order_relaxed);
      out.cycles_initiator[t] =
          ns.cycles_initiator[t].load(std::memory_order_relaxed);
      out.cycles_target[t] = ns.cycles_target[t].load(std::memory_order_relaxed);
    }
  }
  std::lock_guard lk(registry_mu_);
  snap.session_clocks = retired_clocks_;
  for (const Session* s : sessions_) {
    if (snap.session_clocks.size() <= s->id()) {
      snap.session_clocks.resize(s->id() + 1, 0.0);
    }
    snap.session_clocks[s->id()] = s->clock();
  }
  return snap;
}

}  // namespace namdb::fabric
