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

#ifndef NAMDB_OLTP_HPP_
#define NAMDB_OLTP_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "namdb/oracle.hpp"
#include "namdb/store.hpp"

// Snapshot-isolation commit protocols. RsiClient drives the client-side
// protocol over one-sided verbs: a CAS on the record header validates the
// observed CID and locks the record in one round trip, a full-block WRITE
// installs the new version and releases the lock, and one unsignaled WRITE
// publishes the commit bit. The storage nodes execute nothing.

namespace namdb::oltp {

enum class Outcome { kInProgress, kCommitted, kAborted };

enum class AbortReason {
  kNone,
  kValidation,           // CAS observed a changed or locked header
  kLockContention,       // read retries exhausted on a locked header
  kSnapshotUnavailable,  // head version newer than the snapshot, no old slot
  kFabric,
};

const char* to_string(Outcome o);
const char* to_string(AbortReason r);

// Thrown from the read path when the transaction cannot proceed; the
// transaction is already marked aborted when this surfaces.
struct TxnAborted : std::runtime_error {
  explicit TxnAborted(AbortReason r)
      : std::runtime_error("transaction aborted"), reason(r) {}
  AbortReason reason;
};

// Per-transaction verb/message counts, frozen at the outcome.
struct ProtocolTally {
  std::uint64_t cas = 0;
  std::uint64_t writes_signaled = 0;
  std::uint64_t writes_unsignaled = 0;
  std::uint64_t reads = 0;
  std::uint64_t fetch_adds = 0;
  // Traditional protocol only: server-side (TM+RM) messages of the commit
  // protocol, excluding the read phase.
  std::uint64_t m_r = 0;
  std::uint64_t m_s = 0;
};

struct ReadEntry {
  const store::Table* table = nullptr;
  std::uint64_t key = 0;
  std::uint64_t observed_cid = 0;
};

struct KeyRef {
  const store::Table* table = nullptr;
  std::uint64_t key = 0;

  friend bool operator==(const KeyRef&, const KeyRef&) = default;
};

struct TxnDescriptor {
  std::uint64_t txn_id = 0;
  std::uint32_t client_id = 0;
  std::uint64_t rid = 0;
  std::uint64_t cid = 0;  // 0 when no commit timestamp was allocated
  Outcome outcome = Outcome::kInProgress;
  AbortReason abort_reason = AbortReason::kNone;
  std::vector<ReadEntry> reads;
  std::vector<KeyRef> write_keys;
  std::vector<KeyRef> insert_keys;
  ProtocolTally tally;
  double commit_latency = 0;  // modeled seconds spent in commit
  double txn_latency = 0;     // modeled seconds begin..outcome
};

// One line per transaction, for cross-implementation comparison and the
// history checker: txn, client, rid, cid, outcome, reads, writes, inserts.
std::string format_history_line(const TxnDescriptor& d);

// SI history checker: first-committer-wins for concurrent committed
// write-sets, snapshot-consistent reads (each read observes the largest
// committed CID <= rid for its key), atomic visibility (no aborted version
// is ever observed), and per-client RID monotonicity.
struct SiCheckResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};
SiCheckResult check_si_history(std::span<const TxnDescriptor> txns);

// Active RSI transaction state.
class Txn {
 public:
  TxnDescriptor& descriptor() { return desc_; }
  const TxnDescriptor& descriptor() const { return desc_; }
  Outcome outcome() const { return desc_.outcome; }

 private:
  friend class RsiClient;
  friend class RsiCommitStepper;

  struct PendingWrite {
    const store::Table* table;
    std::uint64_t key;
    std::uint64_t observed_cid;
    store::RecordBlock snapshot;  // block as read, for install shifting
    std::vector<std::uint8_t> payload;
    fabric::RemoteAddress header;
  };
  struct PendingInsert {
    const store::Table* table;
    std::vector<std::uint8_t> payload;
  };

  TxnDescriptor desc_;
  std::vector<PendingWrite> writes_;
  std::vector<PendingWrite> read_cache_;  // blocks as read, update candidates
  std::vector<PendingInsert> inserts_;
  double begin_clock_ = 0;
};

class RsiClient {
 public:
  RsiClient(store::StoreClient& store, oracle::OracleClient& oracle,
            fabric::Session& session, int max_read_attempts = 10);

  fabric::Session& session() { return session_; }
  oracle::OracleClient& oracle() { return oracle_; }

  Txn begin(std::uint64_t txn_id);

  // Snapshot read of the head version; records the observation. Throws
  // TxnAborted on lock-retry exhaustion or an unavailable snapshot.
  std::vector<std::uint8_t> read(Txn& txn, const store::Table& table,
                                 std::uint64_t key);

  // Stages an update; the key must have been read in this transaction
  // (blind writes are not allowed).
  void stage_update(Txn& txn, const store::Table& table, std::uint64_t key,
                    std::vector<std::uint8_t> payload);

  void stage_insert(Txn& txn, const store::Table& table,
                    std::vector<std::uint8_t> payload);

  // Validate+lock via one CAS per record (posted as one parallel batch),
  // install+unlock via one signaled block WRITE per record, then one
  // unsignaled publish. Returns the outcome; validation failure rolls back
  // already-locked records.
  Outcome commit(Txn& txn);

 private:
  friend class RsiCommitStepper;

  void sort_writes(Txn& txn);
  std::vector<std::uint8_t> install_bytes(const Txn::PendingWrite& w,
                                          std::uint64_t cid) const;
  void rollback_locked(Txn& txn, std::span<const std::size_t> locked);
  void do_inserts(Txn& txn, std::uint64_t cid);
  void finish(Txn& txn, Outcome o, AbortReason r);

  store::StoreClient& store_;
  oracle::OracleClient& oracle_;
  fabric::Session& session_;
  int max_read_attempts_;
  std::uint64_t insert_rr_ = 0;  // round-robin node choice for inserts
};

// Single-stepped commit used by the interleaving tests: identical protocol
// actions to RsiClient::commit, but one verb at a time under external
// control.
class RsiCommitStepper {
 public:
  RsiCommitStepper(RsiClient& client, Txn& txn);

  bool done() const { return done_; }
  // Executes the next protocol action: one CAS, the abort rollback, one
  // install WRITE, or the publish.
  void step();

 private:
  RsiClient& client_;
  Txn& txn_;
  std::uint64_t cid_ = 0;
  std::size_t next_cas_ = 0;
  std::size_t next_install_ = 0;
  std::vector<std::size_t> locked_;
  bool cas_failed_ = false;
  bool done_ = false;
};

}  // namespace namdb::oltp

#endif  // NAMDB_OLTP_HPP_
