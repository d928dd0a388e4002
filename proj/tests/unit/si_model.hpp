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

#ifndef NAMDB_TESTS_SI_MODEL_HPP_
#define NAMDB_TESTS_SI_MODEL_HPP_

// Independent abstract model of the client-driven SI commit protocol,
// used as the oracle for the exhaustive interleaving tests. Deliberately
// built from the protocol definition alone: single-version records with a
// lock flag, pre-assigned round-robin commit timestamps, a published-bit
// set defining the snapshot horizon, validate+lock as one atomic step per
// record, install+unlock per record, publish at the end. No dependency on
// the production implementation.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace si_model {

enum class Outcome { kPending, kCommitted, kAbortedValidation,
                     kAbortedSnapshot, kAbortedLock };

struct Record {
  std::uint64_t head_cid = 0;
  bool locked = false;
};

struct Model {
  std::uint32_t num_clients;
  std::map<std::uint64_t, Record> store;  // key -> record
  std::set<std::uint64_t> published;

  explicit Model(std::uint32_t clients) : num_clients(clients) {}

  std::uint64_t rid() const {
    std::uint64_t t = 0;
    while (published.contains(t + 1)) {
      ++t;
    }
    return t;
  }
};

struct ModelTxn {
  std::uint32_t client;  // 1-based; each client runs one transaction
  std::vector<std::uint64_t> write_keys;

  // runtime state
  Outcome outcome = Outcome::kPending;
  std::uint64_t rid = 0;
  std::uint64_t cid = 0;
  std::map<std::uint64_t, std::uint64_t> observed;
  std::vector<std::uint64_t> locked;
  std::size_t next_cas = 0;
  std::size_t next_install = 0;
  bool cas_failed = false;
  bool snapshot_taken = false;
  bool published_done = false;

  bool done() const {
    return outcome != Outcome::kPending && (outcome != Outcome::kCommitted ||
                                            published_done);
  }
};

// Snapshot step: acquire the read timestamp and read every write key.
inline void model_snapshot(Model& m, ModelTxn& t) {
  t.rid = m.rid();
  t.snapshot_taken = true;
  std::sort(t.write_keys.begin(), t.write_keys.end());
  for (std::uint64_t key : t.write_keys) {
    const Record& rec = m.store[key];
    if (rec.locked) {
      t.outcome = Outcome::kAbortedLock;
      return;
    }
    if (rec.head_cid > t.rid) {
      t.outcome = Outcome::kAbortedSnapshot;
      return;
    }
    t.observed[key] = rec.head_cid;
  }
}

// One commit micro-step, mirroring the per-record protocol actions.
inline void model_step(Model& m, ModelTxn& t) {
  if (t.outcome == Outcome::kAbortedLock ||
      t.outcome == Outcome::kAbortedSnapshot || t.done()) {
    return;
  }
  if (!t.snapshot_taken) {
    model_snapshot(m, t);
    return;
  }
  if (t.cid == 0) {
    t.cid = t.client;  // first slot of this client in the round-robin
  }
  if (t.cas_failed) {
    for (std::uint64_t key : t.locked) {
      m.store[key].locked = false;
    }
    m.published.insert(t.cid);  // retire the unused timestamp
    t.outcome = Outcome::kAbortedValidation;
    return;
  }
  if (t.next_cas < t.write_keys.size()) {
    std::uint64_t key = t.write_keys[t.next_cas++];
    Record& rec = m.store[key];
    if (!rec.locked && rec.head_cid == t.observed[key]) {
      rec.locked = true;
      t.locked.push_back(key);
    } else {
      t.cas_failed = true;
    }
    return;
  }
  if (t.next_install < t.write_keys.size()) {
    std::uint64_t key = t.write_keys[t.next_install++];
    Record& rec = m.store[key];
    rec.head_cid = t.cid;
    rec.locked = false;
    return;
  }
  m.published.insert(t.cid);
  t.outcome = Outcome::kCommitted;
  t.published_done = true;
}

// Step budget that covers both the commit and abort paths.
inline std::size_t model_step_budget(const ModelTxn& t) {
  return 1 + 2 * t.write_keys.size() + 2;
}

}  // namespace si_model

#endif  // NAMDB_TESTS_SI_MODEL_HPP_
