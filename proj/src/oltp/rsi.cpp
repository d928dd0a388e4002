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

#include "namdb/oltp.hpp"

#include <algorithm>
#include <cassert>

namespace namdb::oltp {

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kInProgress:
      return "in-progress";
    case Outcome::kCommitted:
      return "committed";
    case Outcome::kAborted:
      return "aborted";
  }
  return "?";
}

const char* to_string(AbortReason r) {
  switch (r) {
    case AbortReason::kNone:
      return "none";
    case AbortReason::kValidation:
      return "validation";
    case AbortReason::kLockContention:
      return "lock-contention";
    case AbortReason::kSnapshotUnavailable:
      return "snapshot-unavailable";
    case AbortReason::kFabric:
      return "fabric";
  }
  return "?";
}

RsiClient::RsiClient(store::StoreClient& store, oracle::OracleClient& oracle,
                     fabric::Session& session, int max_read_attempts)
    : store_(store),
      oracle_(oracle),
      session_(session),
      max_read_attempts_(max_read_attempts) {}

Txn RsiClient::begin(std::uint64_t txn_id) {
  Txn txn;
  txn.desc_.txn_id = txn_id;
  txn.desc_.client_id = oracle_.client_id();
  txn.begin_clock_ = session_.clock();
  txn.desc_.rid = oracle_.current_rid();
  txn.desc_.tally.reads += 1;  // the RID fetch
  return txn;
}

std::vector<std::uint8_t> RsiClient::read(Txn& txn, const store::Table& table,
                                          std::uint64_t key) {
  for (int attempt = 0; attempt < max_read_attempts_; ++attempt) {
    store::RecordBlock block = store_.read_block(table, key);
    txn.desc_.tally.reads += 1;
    if (block.locked) {
      continue;  // writer holds the header only across two round trips
    }
    if (block.head_cid <= txn.desc_.rid) {
      txn.desc_.reads.push_back({&table, key, block.head_cid});
      auto payload = block.head_payload;
      // Stash the block so a later update can shift versions client-side.
      txn.read_cache_.push_back(Txn::PendingWrite{
          &table, key, block.head_cid, std::move(block), {},
          store_.catalog().header_address(table, key)});
      return payload;
    }
    // Head is newer than the snapshot and the shipped configuration keeps
    // a single version slot: no older snapshot to fall back to.
    finish(txn, Outcome::kAborted, AbortReason::kSnapshotUnavailable);
    throw TxnAborted(AbortReason::kSnapshotUnavailable);
  }
  finish(txn, Outcome::kAborted, AbortReason::kLockContention);
  throw TxnAborted(AbortReason::kLockContention);
}

void RsiClient::stage_update(Txn& txn, const store::Table& table,
                             std::uint64_t key,
                             std::vector<std::uint8_t> payload) {
  if (payload.size() != table.spec.payload_bytes) {
    throw store::StoreError("payload width mismatch");
  }
  for (auto it = txn.read_cache_.begin(); it != txn.read_cache_.end(); ++it) {
    if (it->table == &table && it->key == key) {
      Txn::PendingWrite w = std::move(*it);
      txn.read_cache_.erase(it);
      w.payload = std::move(payload);
      txn.writes_.push_back(std::move(w));
      txn.desc_.write_keys.push_back({&table, key});
      return;
    }
  }
  throw store::StoreError("blind write: key was not read in this transaction");
}

void RsiClient::stage_insert(Txn& txn, const store::Table& table,
                             std::vector<std::uint8_t> payload) {
  if (payload.size() != table.spec.payload_bytes) {
    throw store::StoreError("payload width mismatch");
  }
  txn.inserts_.push_back({&table, std::move(payload)});
}

void RsiClient::sort_writes(Txn& txn) {
  std::sort(txn.writes_.begin(), txn.writes_.end(),
            [](const Txn::PendingWrite& a, const Txn::PendingWrite& b) {
              if (a.header.node != b.header.node) {
                return a.header.node < b.header.node;
              }
              return a.header.offset < b.header.offset;
            });
}

std::vector<std::uint8_t> RsiClient::install_bytes(const Txn::PendingWrite& w,
                                                   std::uint64_t cid) const {
  store::RecordBlock block = w.snapshot;
  block.push_version(cid, w.payload);
  return store::encode_block(block, w.table->spec.payload_bytes,
                             w.table->spec.slots);
}

void RsiClient::rollback_locked(Txn& txn, std::span<const std::size_t> locked) {
  std::vector<std::uint8_t> word(8);
  for (std::size_t i : locked) {
    const auto& w = txn.writes_[i];
    fabric::store_u64(word.data(),
                      store::encode_record_header(false, w.observed_cid));
    session_.write_unsignaled(w.header, word);
    txn.desc_.tally.writes_unsignaled += 1;
  }
}

void RsiClient::do_inserts(Txn& txn, std::uint64_t cid) {
  if (txn.inserts_.empty()) {
    return;
  }
  // Allocate all keys in one parallel FETCH_ADD batch, then install the
  // new blocks in one parallel WRITE batch; inserts never conflict.
  std::vector<fabric::Session::BatchVerb> allocs;
  std::vector<std::size_t> node_choice;
  for (const auto& ins : txn.inserts_) {
    std::size_t node_idx = insert_rr_++ % store_.catalog().node_count();
    node_choice.push_back(node_idx);
    fabric::Session::BatchVerb v;
    v.verb = fabric::Verb::kFetchAdd;
    v.remote = ins.table->allocator_words[node_idx];
    v.value = 1;
    allocs.push_back(std::move(v));
  }
  auto completions = session_.run_batch(std::move(allocs));
  txn.desc_.tally.fetch_adds += txn.inserts_.size();

  std::vector<fabric::Session::BatchVerb> writes;
  for (std::size_t i = 0; i < txn.inserts_.size(); ++i) {
    const auto& ins = txn.inserts_[i];
    std::uint64_t local = fabric::load_u64(completions[i].data.data());
    if (local >= ins.table->spec.capacity_per_node) {
      throw store::StoreError("table region exhausted on node");
    }
    std::uint64_t key = store_.catalog().key_for(node_choice[i], local);
    store::RecordBlock block;
    block.head_cid = cid;
    block.head_payload = ins.payload;
    block.older.resize(ins.table->spec.slots - 1);
    fabric::Session::BatchVerb v;
    v.verb = fabric::Verb::kWrite;
    v.remote = store_.catalog().locate(*ins.table, key);
    v.data = store::encode_block(block, ins.table->spec.payload_bytes,
                                 ins.table->spec.slots);
    writes.push_back(std::move(v));
    txn.desc_.insert_keys.push_back({ins.table, key});
  }
  session_.run_batch(std::move(writes));
  txn.desc_.tally.writes_signaled += txn.inserts_.size();
}

void RsiClient::finish(Txn& txn, Outcome o, AbortReason r) {
  txn.desc_.outcome = o;
  txn.desc_.abort_reason = r;
  txn.desc_.txn_latency = session_.clock() - txn.begin_clock_;
  txn.read_cache_.clear();
}

Outcome RsiClient::commit(Txn& txn) {
  double commit_start = session_.clock();
  const std::size_t w_count = txn.writes_.size();
  if (w_count == 0 && txn.inserts_.empty()) {
    // Read-only: nothing to validate, no timestamp consumed, no publication.
    finish(txn, Outcome::kCommitted, AbortReason::kNone);
    txn.desc_.commit_latency = session_.clock() - commit_start;
    return Outcome::kCommitted;
  }

  std::uint64_t cid = oracle_.next_cid();
  txn.desc_.cid = cid;
  sort_writes(txn);

  try {
    if (w_count > 0) {
      // Phase 1: validate + lock every record in one parallel CAS batch.
      std::vector<fabric::Session::BatchVerb> batch;
      batch.reserve(w_count);
      for (const auto& w : txn.writes_) {
        fabric::Session::BatchVerb v;
        v.verb = fabric::Verb::kCas;
        v.remote = w.header;
        v.expected = store::encode_record_header(false, w.observed_cid);
        v.value = store::encode_record_header(true, w.observed_cid);
        batch.push_back(std::move(v));
      }
      auto completions = session_.run_batch(std::move(batch));
      txn.desc_.tally.cas += w_count;

      std::vector<std::size_t> locked;
      bool all_ok = true;
      for (std::size_t i = 0; i < w_count; ++i) {
        if (completions[i].status != fabric::CompletionStatus::kOk) {
          throw fabric::FabricError("cas failed");
        }
        std::uint64_t old = fabric::load_u64(completions[i].data.data());
        if (old == store::encode_record_header(false,
                                               txn.writes_[i].observed_cid)) {
          locked.push_back(i);
        } else {
          all_ok = false;
        }
      }
      if (!all_ok) {
        rollback_locked(txn, locked);
        oracle_.publish_commit(cid);  // retire the unused timestamp
        txn.desc_.tally.writes_unsignaled += 1;
        finish(txn, Outcome::kAborted, AbortReason::kValidation);
        txn.desc_.commit_latency = session_.clock() - commit_start;
        return Outcome::kAborted;
      }

      // Phase 2: install the new head version and release the lock with
      // one signaled block WRITE per record, batched.
      std::vector<fabric::Session::BatchVerb> installs;
      installs.reserve(w_count);
      for (const auto& w : txn.writes_) {
        fabric::Session::BatchVerb v;
        v.verb = fabric::Verb::kWrite;
        v.remote = w.header;
        v.data = install_bytes(w, cid);
        installs.push_back(std::move(v));
      }
      session_.run_batch(std::move(installs));
      txn.desc_.tally.writes_signaled += w_count;
    }

    do_inserts(txn, cid);

    oracle_.publish_commit(cid);
    txn.desc_.tally.writes_unsignaled += 1;
  } catch (const fabric::FabricError&) {
    // Locks we may hold are released by rewriting old headers; the
    // timestamp is retired so the snapshot horizon keeps advancing.
    std::vector<std::size_t> all(w_count);
    for (std::size_t i = 0; i < w_count; ++i) all[i] = i;
    rollback_locked(txn, all);
    oracle_.publish_commit(cid);
    txn.desc_.tally.writes_unsignaled += 1;
    finish(txn, Outcome::kAborted, AbortReason::kFabric);
    txn.desc_.commit_latency = session_.clock() - commit_start;
    return Outcome::kAborted;
  }

  finish(txn, Outcome::kCommitted, AbortReason::kNone);
  txn.desc_.commit_latency = session_.clock() - commit_start;
  return Outcome::kCommitted;
}

// ---------------------------------------------------------------------------
// Stepper

RsiCommitStepper::RsiCommitStepper(RsiClient& client, Txn& txn)
    : client_(client), txn_(txn) {
  if (txn_.writes_.empty() && txn_.inserts_.empty()) {
    client_.finish(txn_, Outcome::kCommitted, AbortReason::kNone);
    done_ = true;
    return;
  }
  cid_ = client_.oracle_.next_cid();
  txn_.desc_.cid = cid_;
  client_.sort_writes(txn_);
}

void RsiCommitStepper::step() {
  if (done_) {
    return;
  }
  auto& tally = txn_.desc_.tally;
  if (cas_failed_) {
    client_.rollback_locked(txn_, locked_);
    client_.oracle_.publish_commit(cid_);
    tally.writes_unsignaled += 1;
    client_.finish(txn_, Outcome::kAborted, AbortReason::kValidation);
    done_ = true;
    return;
  }
  if (next_cas_ < txn_.writes_.size()) {
    const auto& w = txn_.writes_[next_cas_];
    std::uint64_t expected = store::encode_record_header(false, w.observed_cid);
    std::uint64_t old = client_.session_.cas(
        w.header, expected, store::encode_record_header(true, w.observed_cid));
    tally.cas += 1;
    if (old == expected) {
      locked_.push_back(next_cas_);
    } else {
      cas_failed_ = true;  // the abort rollback is the next step
    }
    ++next_cas_;
    return;
  }
  if (next_install_ < txn_.writes_.size()) {
    const auto& w = txn_.writes_[next_install_];
    client_.session_.write(w.header, client_.install_bytes(w, cid_));
    tally.writes_signaled += 1;
    ++next_install_;
    return;
  }
  client_.do_inserts(txn_, cid_);
  client_.oracle_.publish_commit(cid_);
  tally.writes_unsignaled += 1;
  client_.finish(txn_, Outcome::kCommitted, AbortReason::kNone);
  done_ = true;
}

}  // namespace namdb::oltp
