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
#include <mutex>
#include <thread>

#include "namdb/bench.hpp"
#include "namdb/trad.hpp"

namespace namdb::bench {

namespace {

void latency_stats(OltpReport* report) {
  std::vector<double> commit;
  double txn_sum = 0;
  for (const auto& d : report->history) {
    txn_sum += d.txn_latency;
    if (d.outcome == oltp::Outcome::kCommitted) {
      commit.push_back(d.commit_latency);
    }
  }
  if (!report->history.empty()) {
    report->mean_txn_latency = txn_sum / report->history.size();
  }
  if (commit.empty()) {
    return;
  }
  std::sort(commit.begin(), commit.end());
  double sum = 0;
  for (double v : commit) sum += v;
  report->mean_commit_latency = sum / commit.size();
  report->p50_commit_latency = commit[commit.size() / 2];
  report->p95_commit_latency = commit[commit.size() * 95 / 100];
}

void common_verdicts(OltpReport* report) {
  auto check = check_si_history(report->history);
  std::string detail;
  for (const auto& v : check.violations) {
    detail += v + "; ";
  }
  report->verdicts.push_back({"si-history", check.ok(), detail});
  report->verdicts.push_back(
      {"attempted-accounting",
       report->committed + report->aborted == report->attempted, ""});
}

void finish_counts(OltpReport* report) {
  report->attempted = report->history.size();
  for (const auto& d : report->history) {
    if (d.outcome == oltp::Outcome::kCommitted) {
      ++report->committed;
    } else {
      ++report->aborted;
      ++report->abort_reasons[to_string(d.abort_reason)];
    }
  }
}

OltpReport run_rsi(const ExperimentConfig& cfg) {
  OltpReport report;
  const std::uint32_t storage = cfg.storage_nodes;
  const std::uint32_t clients = cfg.clients;
  // Node layout: storage nodes, then the timestamp host, then one node
  // per client session.
  fabric::Fabric fabric(storage + 1 + clients, cfg.latency);
  std::vector<fabric::NodeId> storage_nodes(storage);
  for (std::uint32_t i = 0; i < storage; ++i) {
    storage_nodes[i] = i;
  }
  store::Catalog catalog(fabric, storage_nodes);

  const std::uint64_t inserts_per_txn = 4;
  std::uint64_t order_capacity =
      (cfg.clients * cfg.txns_per_client * inserts_per_txn) / storage + 16;
  store::Table& products = catalog.create_table(
      {"products", cfg.product_payload_bytes, 1,
       cfg.products / storage + 16});
  store::Table& orders = catalog.create_table(
      {"orders", cfg.insert_payload_bytes, 1, order_capacity});
  store::Table& orderlines = catalog.create_table(
      {"orderlines", cfg.insert_payload_bytes, 1, order_capacity * 3});

  oracle::TimestampVector vec(fabric, storage, clients,
                              std::max<std::uint64_t>(cfg.timestamp_bits, 64));

  {
    auto loader = fabric.create_session(storage);
    store::StoreClient sc(catalog, *loader);
    for (std::uint64_t key = 0; key < cfg.products; ++key) {
      sc.insert_block(products, gen_payload(cfg.product_payload_bytes, key), 0);
    }
  }

  std::mutex history_mu;
  report.history.reserve(clients * cfg.txns_per_client);
  auto before = fabric.snapshot();

  std::vector<std::thread> threads;
  for (std::uint32_t c = 0; c < clients; ++c) {
    threads.emplace_back([&, c] {
      auto session = fabric.create_session(storage + 1 + c);
      store::StoreClient sc(catalog, *session);
      oracle::OracleClient oc(vec, *session, c + 1);
      oltp::RsiClient client(sc, oc, *session, cfg.lock_retries);
      Rng rng(cfg.seed * 0x1000193 + c + 1);
      std::vector<oltp::TxnDescriptor> local;
      local.reserve(cfg.txns_per_client);
      for (std::uint64_t t = 0; t < cfg.txns_per_client; ++t) {
        CheckoutTxn w = gen_checkout_txn(rng, cfg.products);
        std::uint64_t txn_id = (static_cast<std::uint64_t>(c) << 32) | t;
        auto txn = client.begin(txn_id);
        try {
          for (std::uint64_t key : w.product_keys) {
            auto stock = client.read(txn, products, key);
            // New stock payload derived from the old one.
            auto updated = gen_payload(cfg.product_payload_bytes,
                                       w.order_tag ^ key ^ stock[0]);
            client.stage_update(txn, products, key, std::move(updated));
          }
          client.stage_insert(txn, orders,
                              gen_payload(cfg.insert_payload_bytes, w.order_tag));
          for (int ol = 0; ol < 3; ++ol) {
            client.stage_insert(
                txn, orderlines,
                gen_payload(cfg.insert_payload_bytes, w.order_tag + ol + 1));
          }
          client.commit(txn);
        } catch (const oltp::TxnAborted&) {
          // aborted during the read phase; descriptor already finalized
        }
        local.push_back(txn.descriptor());
      }
      std::lock_guard lk(history_mu);
      for (auto& d : local) {
        report.history.push_back(std::move(d));
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }

  report.metrics = fabric.snapshot();
  auto delta = fabric::diff(before, report.metrics);
  for (std::uint32_t n = 0; n < storage; ++n) {
    report.storage_node_cycles += delta.nodes[n].cycles_total();
  }

  finish_counts(&report);
  latency_stats(&report);
  common_verdicts(&report);

  // Per committed transaction of write-set size W: exactly W CAS, W
  // signaled WRITEs plus one per insert, one unsignaled publish, and one
  // FETCH_ADD per insert.
  bool tally_ok = true;
  std::string tally_detail;
  for (const auto& d : report.history) {
    if (d.outcome != oltp::Outcome::kCommitted) {
      continue;
    }
    std::uint64_t w = d.write_keys.size();
    std::uint64_t ins = d.insert_keys.size();
    if (d.tally.cas != w ||
        d.tally.writes_signaled != w + ins ||
        d.tally.fetch_adds != ins ||
        d.tally.writes_unsignaled != (w + ins > 0 ? 1u : 0u)) {
      tally_ok = false;
      tally_detail = "txn " + std::to_string(d.txn_id) + ": cas=" +
                     std::to_string(d.tally.cas) + " wsig=" +
                     std::to_string(d.tally.writes_signaled) + " wuns=" +
                     std::to_string(d.tally.writes_unsignaled) + " fa=" +
                     std::to_string(d.tally.fetch_adds);
      break;
    }
  }
  report.verdicts.push_back({"rsi-verb-tally", tally_ok, tally_detail});
  report.verdicts.push_back({"storage-cycles-zero",
                             report.storage_node_cycles == 0.0,
                             std::to_string(report.storage_node_cycles)});
  return report;
}

OltpReport run_trad(const ExperimentConfig& cfg) {
  OltpReport report;
  const std::uint32_t rms = cfg.storage_nodes;
  const std::uint32_t clients = cfg.clients;
  // Node layout: RM nodes, the TM node, then the client nodes.
  fabric::Fabric fabric(rms + 1 + clients, cfg.latency);

  oltp::trad::Config tc;
  tc.transport = cfg.transport;
  tc.num_rms = rms;
  tc.num_clients = clients;
  tc.tables = {{"products", cfg.product_payload_bytes},
               {"orders", cfg.insert_payload_bytes},
               {"orderlines", cfg.insert_payload_bytes}};
  std::vector<fabric::NodeId> rm_nodes(rms);
  for (std::uint32_t i = 0; i < rms; ++i) {
    rm_nodes[i] = i;
  }
  std::vector<fabric::NodeId> client_nodes(clients);
  for (std::uint32_t i = 0; i < clients; ++i) {
    client_nodes[i] = rms + 1 + i;
  }
  oltp::trad::Cluster cluster(fabric, rms, rm_nodes, client_nodes, tc);

  for (std::uint64_t key = 0; key < cfg.products; ++key) {
    cluster.preload(0, key, gen_payload(cfg.product_payload_bytes, key));
  }
  cluster.start();

  std::mutex history_mu;
  std::vector<std::thread> threads;
  for (std::uint32_t c = 0; c < clients; ++c) {
    threads.emplace_back([&, c] {
      auto& client = cluster.client(c);
      Rng rng(cfg.seed * 0x1000193 + c + 1);
      std::vector<oltp::TxnDescriptor> local;
      for (std::uint64_t t = 0; t < cfg.txns_per_client; ++t) {
        CheckoutTxn w = gen_checkout_txn(rng, cfg.products);
        std::uint64_t txn_id = (static_cast<std::uint64_t>(c) << 32) | t;
        auto txn = client.begin(txn_id);
        double begin_clock = client.session().clock();
        for (std::uint64_t key : w.product_keys) {
          auto stock = client.read(txn, 0, key);
          auto updated = gen_payload(cfg.product_payload_bytes,
                                     w.order_tag ^ key ^ stock[0]);
          client.stage_update(txn, 0, key, std::move(updated));
        }
        client.stage_insert(txn, 1,
                            gen_payload(cfg.insert_payload_bytes, w.order_tag));
        for (int ol = 0; ol < 3; ++ol) {
          client.stage_insert(
              txn, 2, gen_payload(cfg.insert_payload_bytes, w.order_tag + ol + 1));
        }
        client.commit(txn);
        txn.txn_latency = client.session().clock() - begin_clock;
        local.push_back(std::move(txn));
      }
      std::lock_guard lk(history_mu);
      for (auto& d : local) {
        report.history.push_back(std::move(d));
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  cluster.stop();

  // Merge the server-side tallies collected at the TM.
  bool tally_ok = true;
  std::string tally_detail;
  for (auto& d : report.history) {
    auto counts = cluster.counts_of(d.txn_id);
    if (!counts) {
      tally_ok = false;
      tally_detail = "missing tally for txn " + std::to_string(d.txn_id);
      continue;
    }
    d.tally = counts->tally;
    std::uint64_t n = counts->involved_rms;
    if (d.tally.m_r != 2 + 4 * n || d.tally.m_s != 3 + 4 * n) {
      tally_ok = false;
      tally_detail = "txn " + std::to_string(d.txn_id) + " touched " +
                     std::to_string(n) + " RMs: m_r=" +
                     std::to_string(d.tally.m_r) + " m_s=" +
                     std::to_string(d.tally.m_s);
    }
  }

  report.metrics = fabric.snapshot();
  for (std::uint32_t n = 0; n <= rms; ++n) {  // RM nodes plus the TM node
    report.storage_node_cycles += report.metrics.nodes[n].cycles_total();
  }
  finish_counts(&report);
  latency_stats(&report);
  common_verdicts(&report);
  report.verdicts.push_back({"trad-message-tally", tally_ok, tally_detail});
  report.verdicts.push_back({"server-cycles-positive",
                             report.storage_node_cycles > 0,
                             std::to_string(report.storage_node_cycles)});
  return report;
}

}  // namespace

bool OltpReport::all_passed() const {
  for (const auto& v : verdicts) {
    if (!v.pass) {
      return false;
    }
  }
  return true;
}

OltpReport run_oltp(const ExperimentConfig& cfg) {
  if (cfg.protocol == "trad") {
    return run_trad(cfg);
  }
  return run_rsi(cfg);
}

}  // namespace namdb::bench
