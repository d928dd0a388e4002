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

#include "namdb/trad.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <stdexcept>

namespace namdb::oltp::trad {

namespace {

enum MsgType : std::uint8_t {
  kRidReq = 1,
  kRidResp,
  kReadReq,
  kReadResp,
  kCommitReq,
  kPrepare,
  kVote,
  kCommit2,
  kAbort2,
  kAck,
  kClientResp,
  kTsReq,
  kTsResp,
  kTsInstall,
  kShutdown,
};

struct Writer {
  std::vector<std::uint8_t> buf;
  void u8(std::uint8_t v) { buf.push_back(v); }
  void u16(std::uint16_t v) {
    buf.push_back(static_cast<std::uint8_t>(v));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const std::vector<std::uint8_t>& b) {
    buf.insert(buf.end(), b.begin(), b.end());
  }
};

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
  std::uint8_t u8() { return buf.at(pos++); }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(buf.at(pos)) |
                      static_cast<std::uint16_t>(buf.at(pos + 1)) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf.at(pos + i)) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf.at(pos + i)) << (8 * i);
    pos += 8;
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    std::vector<std::uint8_t> out(buf.begin() + pos, buf.begin() + pos + n);
    pos += n;
    return out;
  }
};

Writer header(MsgType type, std::uint64_t txn_id) {
  Writer w;
  w.u8(type);
  w.u64(txn_id);
  return w;
}

constexpr double kPollTimeout = 0.25;
constexpr double kFailsafeSeconds = 60.0;
constexpr int kPrepostPerChannel = 64;

void prepost(fabric::Qp* qp, int n = kPrepostPerChannel) {
  for (int i = 0; i < n; ++i) qp->post_receive();
}

}  // namespace

void Cluster::Watermark::mark(std::uint64_t cid) {
  out_of_order.insert(cid);
  while (!out_of_order.empty() && *out_of_order.begin() == high + 1) {
    out_of_order.erase(out_of_order.begin());
    ++high;
  }
}

Cluster::Cluster(fabric::Fabric& fabric, fabric::NodeId tm_node,
                 std::vector<fabric::NodeId> rm_nodes,
                 std::vector<fabric::NodeId> client_nodes, Config config)
    : fabric_(fabric), config_(std::move(config)) {
  if (rm_nodes.size() != config_.num_rms ||
      client_nodes.size() != config_.num_clients) {
    throw std::invalid_argument("node list sizes do not match config");
  }
  for (const auto& t : config_.tables) {
    auto ref = std::make_unique<store::Table>();
    ref->spec.name = t.name;
    ref->spec.payload_bytes = t.payload_bytes;
    table_refs_.push_back(std::move(ref));
  }

  tm_session_ = fabric_.create_session(tm_node);
  control_session_ = fabric_.create_session(tm_node);
  rm_state_.resize(config_.num_rms);
  rm_client_qps_.resize(config_.num_rms);
  for (std::uint32_t r = 0; r < config_.num_rms; ++r) {
    rm_sessions_.push_back(fabric_.create_session(rm_nodes[r]));
    rm_state_[r].tables.resize(config_.tables.size());
    rm_state_[r].insert_next.resize(config_.tables.size(), 0);
    auto [tm_side, rm_side] =
        fabric_.create_channel(*tm_session_, *rm_sessions_[r], config_.transport);
    tm_to_rm_.push_back(tm_side);
    rm_from_tm_.push_back(rm_side);
    prepost(tm_side);
    prepost(rm_side);
  }
  // Loopback channel to the co-located timestamp service: both ends live
  // on the TM node, so its counted messages have zero wire latency.
  auto [ts_a, ts_b] =
      fabric_.create_channel(*tm_session_, *tm_session_, config_.transport);
  tm_ts_a_ = ts_a;
  tm_ts_b_ = ts_b;
  prepost(ts_a);
  prepost(ts_b);
  auto [ctl_tm, ctl_local] =
      fabric_.create_channel(*tm_session_, *control_session_, config_.transport);
  tm_control_ = ctl_tm;
  control_to_tm_ = ctl_local;
  prepost(ctl_tm, 4);
  prepost(ctl_local, 4);

  for (std::uint32_t c = 0; c < config_.num_clients; ++c) {
    clients_.push_back(std::make_unique<Client>(*this, c, client_nodes[c]));
  }
}

Cluster::~Cluster() {
  if (running_) {
    stop();
  }
}

const store::Table* Cluster::table_ref(std::size_t table_id) const {
  return table_refs_.at(table_id).get();
}

void Cluster::preload(std::size_t table_id, std::uint64_t key,
                      std::vector<std::uint8_t> payload) {
  if (running_) {
    throw std::logic_error("preload only before start()");
  }
  std::uint32_t rm = static_cast<std::uint32_t>(key % config_.num_rms);
  Row& row = rm_state_[rm].tables[table_id][key];
  row.versions.emplace(row.versions.begin(), 0, std::move(payload));
  std::uint64_t local = key / config_.num_rms;
  auto& next = rm_state_[rm].insert_next[table_id];
  next = std::max(next, local + 1);
}

void Cluster::start() {
  running_ = true;
  tm_thread_ = std::thread([this] { tm_loop(); });
  for (std::uint32_t r = 0; r < config_.num_rms; ++r) {
    rm_threads_.emplace_back([this, r] { rm_loop(r); });
  }
}

void Cluster::stop() {
  if (!running_) {
    return;
  }
  auto msg = header(kShutdown, 0);
  control_session_->send(*control_to_tm_, msg.buf, false);
  tm_thread_.join();
  for (auto& t : rm_threads_) {
    t.join();
  }
  rm_threads_.clear();
  running_ = false;
}

std::optional<TxnServerCounts> Cluster::counts_of(std::uint64_t txn_id) const {
  std::lock_guard lk(counts_mu_);
  auto it = finished_counts_.find(txn_id);
  if (it == finished_counts_.end()) {
    return std::nullopt;
  }
  return it->second;
}

// --------------------------------------------------------------------------
// Timestamp service RPC (loopback; the TM thread plays both roles)

std::uint64_t Cluster::ts_rpc_next_cid() {
  auto req = header(kTsReq, 0);
  tm_session_->send(*tm_ts_a_, req.buf, false);
  double deadline = kFailsafeSeconds;
  std::uint64_t cid = 0;
  bool got = false;
  while (!got) {
    auto c = tm_session_->recv_blocking(kPollTimeout);
    if (!c) {
      deadline -= kPollTimeout;
      if (deadline <= 0) throw std::runtime_error("ts rpc timed out");
      continue;
    }
    Reader r{c->data};
    std::uint8_t type = r.u8();
    r.u64();
    if (c->qp_id == tm_ts_b_->id() && type == kTsReq) {
      // Acting as the timestamp service.
      tm_ts_b_->post_receive();
      auto resp = header(kTsResp, 0);
      resp.u64(watermark_.take());
      tm_session_->send(*tm_ts_b_, resp.buf, false);
    } else if (c->qp_id == tm_ts_a_->id() && type == kTsResp) {
      tm_ts_a_->post_receive();
      cid = r.u64();
      got = true;
    } else {
      tm_stash_.push_back(std::move(*c));
    }
  }
  return cid;
}

void Cluster::ts_send_install(std::uint64_t cid) {
  auto msg = header(kTsInstall, 0);
  msg.u64(cid);
  tm_session_->send(*tm_ts_a_, msg.buf, false);
}

// --------------------------------------------------------------------------
// TM event loop

void Cluster::tm_loop() {
  bool shutdown_seen = false;
  double idle = 0;
  while (true) {
    std::optional<fabric::Completion> c;
    if (!tm_stash_.empty()) {
      c = std::move(tm_stash_.front());
      tm_stash_.pop_front();
    } else {
      c = tm_session_->recv_blocking(kPollTimeout);
    }
    if (!c) {
      idle += kPollTimeout;
      if (shutdown_seen && open_txns_ == 0) {
        break;
      }
      if (idle > kFailsafeSeconds) {
        throw std::runtime_error("tm loop stalled");
      }
      continue;
    }
    idle = 0;
    Reader r{c->data};
    std::uint8_t type = r.u8();
    std::uint64_t txn_id = r.u64();

    if (c->qp_id == tm_control_->id()) {
      tm_control_->post_receive();
      if (type == kShutdown) {
        shutdown_seen = true;
        if (open_txns_ == 0) {
          break;
        }
      }
      continue;
    }
    if (c->qp_id == tm_ts_b_->id()) {
      tm_ts_b_->post_receive();
      if (type == kTsReq) {
        auto resp = header(kTsResp, 0);
        resp.u64(watermark_.take());
        tm_session_->send(*tm_ts_b_, resp.buf, false);
      } else if (type == kTsInstall) {
        watermark_.mark(r.u64());
      }
      continue;
    }
    if (c->qp_id == tm_ts_a_->id()) {
      tm_ts_a_->post_receive();
      continue;  // stray ts response (responses are normally awaited inline)
    }
    tm_handle(txn_id, type, c->data, c->qp_id);
  }
  // Forward shutdown to the resource managers.
  for (std::uint32_t rm = 0; rm < config_.num_rms; ++rm) {
    auto msg = header(kShutdown, 0);
    tm_session_->send(*tm_to_rm_[rm], msg.buf, false);
  }
}

void Cluster::tm_handle(std::uint64_t txn_id, std::uint8_t type,
                        const std::vector<std::uint8_t>& body,
                        std::uint32_t from_qp) {
  Reader r{body};
  r.u8();
  r.u64();
  // Identify the source channel and re-post its receive slot.
  int client_idx = -1;
  int rm_idx = -1;
  for (std::size_t i = 0; i < tm_to_client_.size(); ++i) {
    if (tm_to_client_[i]->id() == from_qp) {
      client_idx = static_cast<int>(i);
      tm_to_client_[i]->post_receive();
      break;
    }
  }
  if (client_idx < 0) {
    for (std::size_t i = 0; i < tm_to_rm_.size(); ++i) {
      if (tm_to_rm_[i]->id() == from_qp) {
        rm_idx = static_cast<int>(i);
        tm_to_rm_[i]->post_receive();
        break;
      }
    }
  }

  switch (type) {
    case kRidReq: {
      // Read-phase message: answered from the co-located service, not
      // part of the commit-protocol tally.
      auto resp = header(kRidResp, txn_id);
      resp.u64(watermark_.rid());
      tm_session_->send(*tm_to_client_[client_idx], resp.buf, false);
      break;
    }
    case kCommitReq: {
      TmTxn& txn = tm_txns_[txn_id];
      txn.client_idx = static_cast<std::uint32_t>(client_idx);
      txn.counts.tally.m_r += 1;  // the commit request
      ++open_txns_;

      r.u64();  // rid (validation uses observed cids)
      std::uint16_t n_upd = r.u16();
      std::vector<std::vector<RmUpdate>> upd_by_rm(config_.num_rms);
      for (std::uint16_t i = 0; i < n_upd; ++i) {
        RmUpdate u;
        u.table = r.u16();
        u.key = r.u64();
        u.observed_cid = r.u64();
        u.payload = r.bytes(config_.tables[u.table].payload_bytes);
        upd_by_rm[u.key % config_.num_rms].push_back(std::move(u));
      }
      std::uint16_t n_ins = r.u16();
      std::vector<std::vector<RmInsert>> ins_by_rm(config_.num_rms);
      for (std::uint16_t i = 0; i < n_ins; ++i) {
        RmInsert ins;
        ins.table = r.u16();
        ins.payload = r.bytes(config_.tables[ins.table].payload_bytes);
        ins_by_rm[(txn_id + i) % config_.num_rms].push_back(std::move(ins));
      }

      // Commit timestamp from the co-located service (could overlap the
      // prepare round; it is free of wire latency here anyway).
      txn.counts.tally.m_s += 1;  // ts request
      txn.cid = ts_rpc_next_cid();
      txn.counts.tally.m_r += 1;  // ts response

      for (std::uint32_t rm = 0; rm < config_.num_rms; ++rm) {
        if (upd_by_rm[rm].empty() && ins_by_rm[rm].empty()) {
          continue;
        }
        txn.involved.push_back(rm);
        auto prep = header(kPrepare, txn_id);
        prep.u16(static_cast<std::uint16_t>(upd_by_rm[rm].size()));
        for (const auto& u : upd_by_rm[rm]) {
          prep.u16(u.table);
          prep.u64(u.key);
          prep.u64(u.observed_cid);
          prep.bytes(u.payload);
        }
        prep.u16(static_cast<std::uint16_t>(ins_by_rm[rm].size()));
        for (const auto& ins : ins_by_rm[rm]) {
          prep.u16(ins.table);
          prep.bytes(ins.payload);
        }
        tm_session_->send(*tm_to_rm_[rm], prep.buf, false);
        txn.counts.tally.m_s += 1;
      }
      txn.counts.involved_rms = static_cast<std::uint32_t>(txn.involved.size());
      txn.votes_pending = txn.counts.involved_rms;

      if (txn.votes_pending == 0) {
        // Read-only commit request: nothing to prepare.
        watermark_.mark(txn.cid);
        auto resp = header(kClientResp, txn_id);
        resp.u8(1);
        resp.u64(txn.cid);
        resp.u16(0);
        tm_session_->send(*tm_to_client_[client_idx], resp.buf, false);
        txn.counts.tally.m_s += 1;
        std::lock_guard lk(counts_mu_);
        finished_counts_[txn_id] = txn.counts;
        tm_txns_.erase(txn_id);
        --open_txns_;
      }
      break;
    }
    case kVote: {
      TmTxn& txn = tm_txns_.at(txn_id);
      txn.counts.tally.m_r += 1;
      bool yes = r.u8() != 0;
      std::uint16_t n_keys = r.u16();
      for (std::uint16_t i = 0; i < n_keys; ++i) {
        std::uint16_t table = r.u16();
        std::uint64_t key = r.u64();
        txn.insert_keys.emplace_back(table, key);
      }
      if (!yes) {
        txn.vote_no = true;
      }
      if (--txn.votes_pending > 0) {
        break;
      }
      // Decision. The client is informed in parallel with the second
      // phase: its notification goes out with the commit/abort round.
      bool committed = !txn.vote_no;
      auto resp = header(kClientResp, txn_id);
      resp.u8(committed ? 1 : 0);
      resp.u64(txn.cid);
      resp.u16(static_cast<std::uint16_t>(committed ? txn.insert_keys.size() : 0));
      if (committed) {
        for (const auto& [table, key] : txn.insert_keys) {
          resp.u16(table);
          resp.u64(key);
        }
      }
      tm_session_->send(*tm_to_client_[txn.client_idx], resp.buf, false);
      txn.counts.tally.m_s += 1;

      for (std::uint32_t rm : txn.involved) {
        auto second = header(committed ? kCommit2 : kAbort2, txn_id);
        if (committed) {
          second.u64(txn.cid);
        }
        tm_session_->send(*tm_to_rm_[rm], second.buf, false);
        txn.counts.tally.m_s += 1;
      }
      txn.acks_pending = static_cast<std::uint32_t>(txn.involved.size());
      break;
    }
    case kAck: {
      TmTxn& txn = tm_txns_.at(txn_id);
      txn.counts.tally.m_r += 1;
      txn.counts.tally.m_r += r.u32();  // RM-side receives
      txn.counts.tally.m_s += r.u32();  // RM-side sends
      if (--txn.acks_pending > 0) {
        break;
      }
      // New value becomes readable only now: notify the timestamp
      // service (one-way) so the watermark can advance.
      ts_send_install(txn.cid);
      txn.counts.tally.m_s += 1;
      {
        std::lock_guard lk(counts_mu_);
        finished_counts_[txn_id] = txn.counts;
      }
      tm_txns_.erase(txn_id);
      --open_txns_;
      break;
    }
    default:
      throw std::runtime_error("tm: unexpected message type " +
                               std::to_string(type));
  }
  (void)rm_idx;
}

// --------------------------------------------------------------------------
// RM event loop

void Cluster::rm_loop(std::uint32_t rm_idx) {
  RmState& state = rm_state_[rm_idx];
  fabric::Session& session = *rm_sessions_[rm_idx];
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>>
      msg_counts;  // txn -> (m_r, m_s)
  double idle = 0;
  while (true) {
    auto c = session.recv_blocking(kPollTimeout);
    if (!c) {
      idle += kPollTimeout;
      if (idle > kFailsafeSeconds) {
        throw std::runtime_error("rm loop stalled");
      }
      continue;
    }
    idle = 0;
    Reader r{c->data};
    std::uint8_t type = r.u8();
    std::uint64_t txn_id = r.u64();

    if (type == kShutdown) {
      break;
    }

    if (type == kReadReq) {
      // Read phase, straight from a client.
      fabric::Qp* back = nullptr;
      for (auto& [qp, client_qp] : rm_client_qps_[rm_idx]) {
        if (qp == c->qp_id) {
          back = client_qp;
          break;
        }
      }
      back->post_receive();
      std::uint16_t table = r.u16();
      std::uint64_t key = r.u64();
      std::uint64_t rid = r.u64();
      auto resp = header(kReadResp, txn_id);
      auto it = state.tables[table].find(key);
      std::uint64_t cid = 0;
      std::vector<std::uint8_t> payload(config_.tables[table].payload_bytes, 0);
      if (it != state.tables[table].end()) {
        for (const auto& [vcid, vpayload] : it->second.versions) {
          if (vcid <= rid) {
            cid = vcid;
            payload = vpayload;
            break;
          }
        }
      }
      resp.u64(cid);
      resp.bytes(payload);
      session.send(*back, resp.buf, false);
      continue;
    }

    rm_from_tm_[rm_idx]->post_receive();
    auto& counts = msg_counts[txn_id];

    switch (type) {
      case kPrepare: {
        counts.first += 1;
        RmState::Pending pending;
        std::uint16_t n_upd = r.u16();
        bool ok = true;
        std::vector<std::pair<std::uint16_t, std::uint64_t>> locked;
        for (std::uint16_t i = 0; i < n_upd; ++i) {
          RmUpdate u;
          u.table = r.u16();
          u.key = r.u64();
          u.observed_cid = r.u64();
          u.payload = r.bytes(config_.tables[u.table].payload_bytes);
          if (!ok) {
            continue;
          }
          Row& row = state.tables[u.table][u.key];
          std::uint64_t head =
              row.versions.empty() ? 0 : row.versions.front().first;
          if (row.locked_by.has_value() || head != u.observed_cid) {
            ok = false;  // modified since read, or locked by a peer
            continue;
          }
          row.locked_by = txn_id;
          locked.emplace_back(u.table, u.key);
          pending.updates.push_back(std::move(u));
        }
        std::uint16_t n_ins = r.u16();
        for (std::uint16_t i = 0; i < n_ins && ok; ++i) {
          RmInsert ins;
          ins.table = r.u16();
          ins.payload = r.bytes(config_.tables[ins.table].payload_bytes);
          std::uint64_t local = state.insert_next[ins.table]++;
          std::uint64_t key = local * config_.num_rms + rm_idx;
          pending.insert_keys.emplace_back(ins.table, key);
          pending.inserts.push_back(std::move(ins));
        }
        if (!ok) {
          for (const auto& [table, key] : locked) {
            state.tables[table][key].locked_by.reset();
          }
        }
        auto vote = header(kVote, txn_id);
        vote.u8(ok ? 1 : 0);
        vote.u16(static_cast<std::uint16_t>(ok ? pending.insert_keys.size() : 0));
        if (ok) {
          for (const auto& [table, key] : pending.insert_keys) {
            vote.u16(table);
            vote.u64(key);
          }
          state.prepared[txn_id] = std::move(pending);
        }
        counts.second += 1;
        session.send(*rm_from_tm_[rm_idx], vote.buf, false);
        break;
      }
      case kCommit2: {
        counts.first += 1;
        std::uint64_t cid = r.u64();
        auto it = state.prepared.find(txn_id);
        if (it != state.prepared.end()) {
          for (auto& u : it->second.updates) {
            Row& row = state.tables[u.table][u.key];
            row.versions.emplace(row.versions.begin(), cid,
                                 std::move(u.payload));
            row.locked_by.reset();
          }
          for (std::size_t i = 0; i < it->second.inserts.size(); ++i) {
            auto& ins = it->second.inserts[i];
            Row& row = state.tables[ins.table]
                                   [it->second.insert_keys[i].second];
            row.versions.emplace(row.versions.begin(), cid,
                                 std::move(ins.payload));
          }
          state.prepared.erase(it);
        }
        auto ack = header(kAck, txn_id);
        counts.second += 1;
        ack.u32(counts.first);
        ack.u32(counts.second);
        session.send(*rm_from_tm_[rm_idx], ack.buf, false);
        msg_counts.erase(txn_id);
        break;
      }
      case kAbort2: {
        counts.first += 1;
        auto it = state.prepared.find(txn_id);
        if (it != state.prepared.end()) {
          for (const auto& u : it->second.updates) {
            state.tables[u.table][u.key].locked_by.reset();
          }
          state.prepared.erase(it);
        }
        auto ack = header(kAck, txn_id);
        counts.second += 1;
        ack.u32(counts.first);
        ack.u32(counts.second);
        session.send(*rm_from_tm_[rm_idx], ack.buf, false);
        msg_counts.erase(txn_id);
        break;
      }
      default:
        throw std::runtime_error("rm: unexpected message type " +
                                 std::to_string(type));
    }
  }
}

// --------------------------------------------------------------------------
// Client

Cluster::Client::Client(Cluster& cluster, std::uint32_t idx,
                        fabric::NodeId node)
    : cluster_(cluster), idx_(idx) {
  session_ = cluster_.fabric_.create_session(node);
  auto [tm_side, client_side] = cluster_.fabric_.create_channel(
      *cluster_.tm_session_, *session_, cluster_.config_.transport);
  cluster_.tm_to_client_.push_back(tm_side);
  to_tm_ = client_side;
  prepost(tm_side);
  prepost(client_side, 8);
  for (std::uint32_t rm = 0; rm < cluster_.config_.num_rms; ++rm) {
    auto [rm_side, client_rm_side] = cluster_.fabric_.create_channel(
        *cluster_.rm_sessions_[rm], *session_, cluster_.config_.transport);
    cluster_.rm_client_qps_[rm].emplace_back(rm_side->id(), rm_side);
    to_rm_.push_back(client_rm_side);
    prepost(rm_side);
    prepost(client_rm_side, 8);
  }
}

TxnDescriptor Cluster::Client::begin(std::uint64_t txn_id) {
  updates_.clear();
  inserts_.clear();
  TxnDescriptor d;
  d.txn_id = txn_id;
  d.client_id = idx_ + 1;
  auto req = header(kRidReq, txn_id);
  req.u32(idx_);
  session_->send(*to_tm_, req.buf, false);
  auto c = session_->recv_blocking(kFailsafeSeconds);
  if (!c) {
    throw std::runtime_error("rid request timed out");
  }
  to_tm_->post_receive();
  Reader r{c->data};
  r.u8();
  r.u64();
  d.rid = r.u64();
  return d;
}

std::vector<std::uint8_t> Cluster::Client::read(TxnDescriptor& txn,
                                                std::size_t table_id,
                                                std::uint64_t key) {
  std::uint32_t rm = static_cast<std::uint32_t>(key % cluster_.config_.num_rms);
  auto req = header(kReadReq, txn.txn_id);
  req.u16(static_cast<std::uint16_t>(table_id));
  req.u64(key);
  req.u64(txn.rid);
  session_->send(*to_rm_[rm], req.buf, false);
  auto c = session_->recv_blocking(kFailsafeSeconds);
  if (!c) {
    throw std::runtime_error("read timed out");
  }
  to_rm_[rm]->post_receive();
  Reader r{c->data};
  r.u8();
  r.u64();
  std::uint64_t cid = r.u64();
  auto payload = r.bytes(cluster_.config_.tables[table_id].payload_bytes);
  txn.reads.push_back({cluster_.table_ref(table_id), key, cid});
  observed_[{table_id, key}] = cid;
  return payload;
}

void Cluster::Client::stage_update(TxnDescriptor& txn, std::size_t table_id,
                                   std::uint64_t key,
                                   std::vector<std::uint8_t> payload) {
  auto it = observed_.find({table_id, key});
  if (it == observed_.end()) {
    throw std::logic_error("blind write: key was not read in this transaction");
  }
  updates_.push_back({static_cast<std::uint16_t>(table_id), key, it->second,
                      std::move(payload)});
  txn.write_keys.push_back({cluster_.table_ref(table_id), key});
}

void Cluster::Client::stage_insert(TxnDescriptor& txn, std::size_t table_id,
                                   std::vector<std::uint8_t> payload) {
  (void)txn;
  inserts_.push_back({static_cast<std::uint16_t>(table_id), std::move(payload)});
}

Outcome Cluster::Client::commit(TxnDescriptor& txn) {
  double commit_start = session_->clock();
  auto req = header(kCommitReq, txn.txn_id);
  req.u64(txn.rid);
  req.u16(static_cast<std::uint16_t>(updates_.size()));
  for (const auto& u : updates_) {
    req.u16(u.table);
    req.u64(u.key);
    req.u64(u.observed_cid);
    req.bytes(u.payload);
  }
  req.u16(static_cast<std::uint16_t>(inserts_.size()));
  for (const auto& ins : inserts_) {
    req.u16(ins.table);
    req.bytes(ins.payload);
  }
  session_->send(*to_tm_, req.buf, false);
  auto c = session_->recv_blocking(kFailsafeSeconds);
  if (!c) {
    throw std::runtime_error("commit response timed out");
  }
  to_tm_->post_receive();
  Reader r{c->data};
  r.u8();
  r.u64();
  bool committed = r.u8() != 0;
  std::uint64_t cid = r.u64();
  std::uint16_t n_keys = r.u16();
  for (std::uint16_t i = 0; i < n_keys; ++i) {
    std::uint16_t table = r.u16();
    std::uint64_t key = r.u64();
    txn.insert_keys.push_back({cluster_.table_ref(table), key});
  }
  txn.cid = cid;
  txn.outcome = committed ? Outcome::kCommitted : Outcome::kAborted;
  txn.abort_reason = committed ? AbortReason::kNone : AbortReason::kValidation;
  txn.commit_latency = session_->clock() - commit_start;
  updates_.clear();
  inserts_.clear();
  observed_.clear();
  return txn.outcome;
}

}  // namespace namdb::oltp::trad
