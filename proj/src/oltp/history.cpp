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

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "namdb/oltp.hpp"

namespace namdb::oltp {

std::string format_history_line(const TxnDescriptor& d) {
  std::ostringstream os;
  os << "txn=" << d.txn_id << " client=" << d.client_id << " rid=" << d.rid
     << " cid=" << d.cid << " outcome=" << to_string(d.outcome);
  if (d.outcome == Outcome::kAborted) {
    os << '(' << to_string(d.abort_reason) << ')';
  }
  os << " reads=";
  for (std::size_t i = 0; i < d.reads.size(); ++i) {
    if (i) os << ';';
    os << d.reads[i].table->spec.name << ':' << d.reads[i].key << '@'
       << d.reads[i].observed_cid;
  }
  os << " writes=";
  for (std::size_t i = 0; i < d.write_keys.size(); ++i) {
    if (i) os << ';';
    os << d.write_keys[i].table->spec.name << ':' << d.write_keys[i].key;
  }
  os << " inserts=";
  for (std::size_t i = 0; i < d.insert_keys.size(); ++i) {
    if (i) os << ';';
    os << d.insert_keys[i].table->spec.name << ':' << d.insert_keys[i].key;
  }
  return os.str();
}

namespace {

using Key = std::pair<const store::Table*, std::uint64_t>;

std::string describe(const TxnDescriptor& d) {
  std::ostringstream os;
  os << "txn " << d.txn_id << " (client " << d.client_id << ", rid " << d.rid
     << ", cid " << d.cid << ")";
  return os.str();
}

}  // namespace

SiCheckResult check_si_history(std::span<const TxnDescriptor> txns) {
  SiCheckResult res;
  auto fail = [&](const std::string& msg) { res.violations.push_back(msg); };

  // Committed writers per key, and CID uniqueness.
  std::map<Key, std::vector<const TxnDescriptor*>> writers;
  std::set<std::uint64_t> cids;
  std::map<Key, int> insert_counts;
  for (const auto& t : txns) {
    if (t.outcome == Outcome::kInProgress) {
      fail(describe(t) + " has no outcome");
      continue;
    }
    if (t.outcome != Outcome::kCommitted) {
      continue;
    }
    if (!t.write_keys.empty() || !t.insert_keys.empty()) {
      if (t.cid == 0) {
        fail(describe(t) + " committed writes without a cid");
        continue;
      }
      if (t.cid <= t.rid) {
        fail(describe(t) + " has cid <= rid");
      }
      if (!cids.insert(t.cid).second) {
        fail(describe(t) + " reuses a commit timestamp");
      }
    }
    for (const auto& w : t.write_keys) {
      writers[{w.table, w.key}].push_back(&t);
    }
    for (const auto& w : t.insert_keys) {
      writers[{w.table, w.key}].push_back(&t);
      if (++insert_counts[{w.table, w.key}] > 1) {
        fail(describe(t) + " inserted an already-allocated key");
      }
    }
  }

  // First committer wins: two committed transactions with intersecting
  // write sets must not be concurrent (one must have committed before the
  // other's snapshot).
  for (const auto& [key, list] : writers) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        const auto* a = list[i];
        const auto* b = list[j];
        bool a_writes = std::find(a->write_keys.begin(), a->write_keys.end(),
                                  KeyRef{key.first, key.second}) !=
                        a->write_keys.end();
        bool b_writes = std::find(b->write_keys.begin(), b->write_keys.end(),
                                  KeyRef{key.first, key.second}) !=
                        b->write_keys.end();
        if (!a_writes || !b_writes) {
          continue;  // inserts target fresh keys and never conflict
        }
        if (!(a->cid <= b->rid || b->cid <= a->rid)) {
          fail("write-write conflict between concurrent " + describe(*a) +
               " and " + describe(*b));
        }
      }
    }
  }

  // Snapshot reads: each read observes exactly the largest committed CID
  // <= rid for its key (0 = base version), and never an aborted version.
  for (const auto& t : txns) {
    for (const auto& r : t.reads) {
      Key key{r.table, r.key};
      std::uint64_t expect = 0;
      bool observed_known = r.observed_cid == 0;
      auto it = writers.find(key);
      if (it != writers.end()) {
        for (const auto* w : it->second) {
          if (w->cid <= t.rid && w->cid > expect) {
            expect = w->cid;
          }
          if (w->cid == r.observed_cid) {
            observed_known = true;
          }
        }
      }
      if (!observed_known) {
        fail(describe(t) + " observed cid " + std::to_string(r.observed_cid) +
             " on key " + std::to_string(r.key) +
             " which no committed transaction wrote");
      } else if (r.observed_cid != expect) {
        fail(describe(t) + " read key " + std::to_string(r.key) + " at cid " +
             std::to_string(r.observed_cid) + ", snapshot expects " +
             std::to_string(expect));
      }
    }
  }

  // Per-client RID monotonicity in txn_id order.
  std::map<std::uint32_t, std::vector<const TxnDescriptor*>> by_client;
  for (const auto& t : txns) {
    by_client[t.client_id].push_back(&t);
  }
  for (auto& [client, list] : by_client) {
    std::sort(list.begin(), list.end(),
              [](const TxnDescriptor* a, const TxnDescriptor* b) {
                return a->txn_id < b->txn_id;
              });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->rid < list[i - 1]->rid) {
        fail("rid moved backwards for client " + std::to_string(client) +
             " at " + describe(*list[i]));
      }
    }
  }
  return res;
}

}  // namespace namdb::oltp
