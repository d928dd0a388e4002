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

#ifndef NAMDB_TRAD_HPP_
#define NAMDB_TRAD_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "namdb/oltp.hpp"

// Traditional TM-coordinated 2PC commit for snapshot isolation over
// two-sided messaging (IPoEth, IPoIB, or two-sided RDMA). Data is
// partitioned across resource managers; the transaction manager drives
// prepare (validate + lock) and commit (install + unlock) rounds. The
// timestamp service is co-located with the TM: its messages travel a
// loopback channel with zero wire latency but are still real counted
// messages. The client is informed in parallel with the second phase, so
// the client-observed critical path is 4 one-way delays.
//
// Server-side message tallies per transaction touching n resource
// managers: m_r = 2 + 4n received and m_s = 3 + 4n sent (TM and RMs are
// servers; the client and the timestamp endpoint are not). Read-phase
// messages are not part of these counts.

namespace namdb::oltp::trad {

struct TableDef {
  std::string name;
  std::size_t payload_bytes = 8;
};

struct Config {
  fabric::Transport transport = fabric::Transport::kIpoEth;
  std::uint32_t num_rms = 2;
  std::uint32_t num_clients = 1;
  std::vector<TableDef> tables;
};

// Tally plus the number of resource managers the transaction touched.
struct TxnServerCounts {
  ProtocolTally tally;
  std::uint32_t involved_rms = 0;
};

class Cluster {
 public:
  // Node ids must be distinct; client_nodes.size() == config.num_clients.
  Cluster(fabric::Fabric& fabric, fabric::NodeId tm_node,
          std::vector<fabric::NodeId> rm_nodes,
          std::vector<fabric::NodeId> client_nodes, Config config);
  ~Cluster();

  const Config& config() const { return config_; }
  const store::Table* table_ref(std::size_t table_id) const;

  // Loads a base version (CID 0) directly into the owning RM; only valid
  // before start().
  void preload(std::size_t table_id, std::uint64_t key,
               std::vector<std::uint8_t> payload);

  void start();
  void stop();

  std::optional<TxnServerCounts> counts_of(std::uint64_t txn_id) const;

  class Client;
  Client& client(std::uint32_t idx) { return *clients_[idx]; }

 private:
  friend class Client;

  struct Row {
    // Newest first.
    std::vector<std::pair<std::uint64_t, std::vector<std::uint8_t>>> versions;
    std::optional<std::uint64_t> locked_by;
  };
  struct RmUpdate {
    std::uint16_t table;
    std::uint64_t key;
    std::uint64_t observed_cid;
    std::vector<std::uint8_t> payload;
  };
  struct RmInsert {
    std::uint16_t table;
    std::vector<std::uint8_t> payload;
  };
  struct RmState {
    std::vector<std::unordered_map<std::uint64_t, Row>> tables;
    std::vector<std::uint64_t> insert_next;  // per table local counter
    struct Pending {
      std::vector<RmUpdate> updates;
      std::vector<std::pair<std::uint16_t, std::uint64_t>> insert_keys;
      std::vector<RmInsert> inserts;
    };
    std::unordered_map<std::uint64_t, Pending> prepared;
  };

  // Consecutive-commit watermark of the co-located timestamp service.
  struct Watermark {
    std::uint64_t next = 1;
    std::uint64_t high = 0;
    std::set<std::uint64_t> out_of_order;
    std::uint64_t take() { return next++; }
    void mark(std::uint64_t cid);
    std::uint64_t rid() const { return high; }
  };

  struct TmTxn {
    std::uint32_t client_idx = 0;
    std::uint64_t cid = 0;
    std::vector<std::uint32_t> involved;
    std::uint32_t votes_pending = 0;
    std::uint32_t acks_pending = 0;
    bool vote_no = false;
    TxnServerCounts counts;
    std::vector<std::pair<std::uint16_t, std::uint64_t>> insert_keys;
  };

  void tm_loop();
  void rm_loop(std::uint32_t rm_idx);
  void tm_handle(std::uint64_t txn_id, std::uint8_t type,
                 const std::vector<std::uint8_t>& body, std::uint32_t from_qp);
  std::uint64_t ts_rpc_next_cid();
  void ts_send_install(std::uint64_t cid);

  fabric::Fabric& fabric_;
  Config config_;
  std::vector<std::unique_ptr<store::Table>> table_refs_;

  std::unique_ptr<fabric::Session> tm_session_;
  std::vector<std::unique_ptr<fabric::Session>> rm_sessions_;
  std::unique_ptr<fabric::Session> control_session_;

  // qp ids on the TM side, for dispatch
  std::vector<fabric::Qp*> tm_to_client_;
  std::vector<fabric::Qp*> tm_to_rm_;
  fabric::Qp* tm_ts_a_ = nullptr;  // TM role end of the loopback channel
  fabric::Qp* tm_ts_b_ = nullptr;  // timestamp-service role end
  fabric::Qp* tm_control_ = nullptr;
  fabric::Qp* control_to_tm_ = nullptr;
  std::vector<fabric::Qp*> rm_from_tm_;  // RM side
  // Per RM: (qp id, qp) of the RM-side ends of client read channels.
  std::vector<std::vector<std::pair<std::uint32_t, fabric::Qp*>>>
      rm_client_qps_;

  std::vector<RmState> rm_state_;
  Watermark watermark_;
  std::unordered_map<std::uint64_t, TmTxn> tm_txns_;
  std::uint64_t open_txns_ = 0;
  std::deque<fabric::Completion> tm_stash_;

  mutable std::mutex counts_mu_;
  std::unordered_map<std::uint64_t, TxnServerCounts> finished_counts_;

  std::vector<std::unique_ptr<Client>> clients_;
  std::thread tm_thread_;
  std::vector<std::thread> rm_threads_;
  bool running_ = false;
};

class Cluster::Client {
 public:
  Client(Cluster& cluster, std::uint32_t idx, fabric::NodeId node);

  fabric::Session& session() { return *session_; }

  // Starts a transaction: fetches the read timestamp from the service.
  TxnDescriptor begin(std::uint64_t txn_id);

  std::vector<std::uint8_t> read(TxnDescriptor& txn, std::size_t table_id,
                                 std::uint64_t key);
  void stage_update(TxnDescriptor& txn, std::size_t table_id,
                    std::uint64_t key, std::vector<std::uint8_t> payload);
  void stage_insert(TxnDescriptor& txn, std::size_t table_id,
                    std::vector<std::uint8_t> payload);

  // Runs 2PC through the TM; returns when the TM's decision arrives (the
  // second phase still runs in parallel). Fills outcome/cid/insert keys;
  // server tallies become available from the cluster once acks drain.
  Outcome commit(TxnDescriptor& txn);

 private:
  friend class Cluster;

  struct StagedUpdate {
    std::uint16_t table;
    std::uint64_t key;
    std::uint64_t observed_cid;
    std::vector<std::uint8_t> payload;
  };
  struct StagedInsert {
    std::uint16_t table;
    std::vector<std::uint8_t> payload;
  };

  Cluster& cluster_;
  std::uint32_t idx_;
  std::unique_ptr<fabric::Session> session_;
  fabric::Qp* to_tm_ = nullptr;
  std::vector<fabric::Qp*> to_rm_;
  std::vector<StagedUpdate> updates_;
  std::vector<StagedInsert> inserts_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::uint64_t> observed_;
};

}  // namespace namdb::oltp::trad

#endif  // NAMDB_TRAD_HPP_
