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
#include <chrono>
#include <unordered_map>

#include "namdb/bench.hpp"

namespace namdb::bench {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

olap::OlapContext make_context(fabric::Fabric& fabric,
                               const ExperimentConfig& cfg) {
  olap::OlapContext ctx;
  ctx.fabric = &fabric;
  ctx.nodes.resize(cfg.olap_nodes);
  for (std::uint32_t i = 0; i < cfg.olap_nodes; ++i) {
    ctx.nodes[i] = i;
  }
  ctx.config.nodes = cfg.olap_nodes;
  ctx.config.bloom_eps = cfg.bloom_eps;
  ctx.config.hash_seed = cfg.seed ^ 0x01AF;
  return ctx;
}

bool wants(const std::string& selected, const char* name) {
  return selected == "all" || selected == name;
}

}  // namespace

void gen_join_relations(std::uint64_t seed, std::uint64_t tuples,
                        double selectivity, std::uint32_t parts,
                        olap::Relation* r, olap::Relation* s) {
  r->tuple_width = 8;
  s->tuple_width = 8;
  r->parts.assign(parts, {});
  s->parts.assign(parts, {});
  Rng rng(seed * 0x9E3779B9 + 7);
  // R keys are distinct; matched S tuples draw from them uniformly, the
  // remainder comes from a disjoint key range.
  std::uint64_t match_count =
      static_cast<std::uint64_t>(selectivity * static_cast<double>(tuples));
  for (std::uint64_t i = 0; i < tuples; ++i) {
    std::uint64_t key = (i << 1);  // even keys: R domain
    r->parts[i % parts].keys.push_back(key);
  }
  for (std::uint64_t i = 0; i < tuples; ++i) {
    std::uint64_t key;
    if (i < match_count) {
      key = rng.below(tuples) << 1;
    } else {
      key = (static_cast<std::uint64_t>(1) << 62) | (i << 1) | 1;
    }
    s->parts[i % parts].keys.push_back(key);
  }
}

olap::Relation gen_agg_relation(std::uint64_t seed, std::uint64_t tuples,
                                std::uint64_t distinct, std::uint32_t parts) {
  olap::Relation r;
  r.tuple_width = 16;
  r.parts.assign(parts, {});
  Rng rng(seed * 0xC0FFEE + 13);
  for (std::uint64_t i = 0; i < tuples; ++i) {
    auto& part = r.parts[i % parts];
    part.keys.push_back(rng.below(distinct));
    part.payloads.push_back(rng.below(1 << 20));
  }
  return r;
}

std::vector<olap::Match> reference_join(const olap::Relation& r,
                                        const olap::Relation& s) {
  std::vector<std::uint64_t> rk, rp, sk, sp;
  for (const auto& part : r.parts) {
    rk.insert(rk.end(), part.keys.begin(), part.keys.end());
    rp.insert(rp.end(), part.payloads.begin(), part.payloads.end());
  }
  for (const auto& part : s.parts) {
    sk.insert(sk.end(), part.keys.begin(), part.keys.end());
    sp.insert(sp.end(), part.payloads.begin(), part.payloads.end());
  }
  bool rpay = r.has_payload();
  bool spay = s.has_payload();
  std::vector<olap::Match> out;
  if (rk.size() * sk.size() <= 4'000'000) {
    // Literal nested loop.
    for (std::size_t i = 0; i < rk.size(); ++i) {
      for (std::size_t j = 0; j < sk.size(); ++j) {
        if (rk[i] == sk[j]) {
          out.push_back({rk[i], rpay ? rp[i] : 0, spay ? sp[j] : 0});
        }
      }
    }
    return out;
  }
  // Same all-pairs semantics via sorted expansion for larger inputs.
  auto order = [](const std::vector<std::uint64_t>& keys) {
    std::vector<std::size_t> idx(keys.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    return idx;
  };
  auto ri = order(rk);
  auto si = order(sk);
  std::size_t i = 0, j = 0;
  while (i < ri.size() && j < si.size()) {
    std::uint64_t a = rk[ri[i]];
    std::uint64_t b = sk[si[j]];
    if (a < b) {
      ++i;
    } else if (a > b) {
      ++j;
    } else {
      std::size_t i_end = i;
      while (i_end < ri.size() && rk[ri[i_end]] == a) ++i_end;
      std::size_t j_end = j;
      while (j_end < si.size() && sk[si[j_end]] == a) ++j_end;
      for (std::size_t x = i; x < i_end; ++x) {
        for (std::size_t y = j; y < j_end; ++y) {
          out.push_back({a, rpay ? rp[ri[x]] : 0, spay ? sp[si[y]] : 0});
        }
      }
      i = i_end;
      j = j_end;
    }
  }
  return out;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> reference_agg(
    const olap::Relation& r, olap::AggFn fn) {
  std::unordered_map<std::uint64_t, std::uint64_t> map;
  for (const auto& part : r.parts) {
    for (std::size_t i = 0; i < part.keys.size(); ++i) {
      std::uint64_t v =
          fn == olap::AggFn::kCount ? 1 : part.payloads[i];
      auto [it, inserted] = map.emplace(part.keys[i], v);
      if (inserted) {
        continue;
      }
      switch (fn) {
        case olap::AggFn::kSum:
        case olap::AggFn::kCount:
          it->second += v;
          break;
        case olap::AggFn::kMin:
          it->second = std::min(it->second, v);
          break;
        case olap::AggFn::kMax:
          it->second = std::max(it->second, v);
          break;
      }
    }
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out(map.begin(),
                                                           map.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool OlapReport::all_passed() const {
  for (const auto& v : verdicts) {
    if (!v.pass) {
      return false;
    }
  }
  return true;
}

OlapReport run_olap_join(const ExperimentConfig& cfg) {
  OlapReport report;
  olap::Relation r, s;
  gen_join_relations(cfg.seed, cfg.relation_tuples, cfg.selectivity,
                     cfg.olap_nodes, &r, &s);

  bool do_verify = cfg.verify && cfg.relation_tuples <= cfg.oracle_cap;
  std::vector<olap::Match> expected;
  if (do_verify) {
    expected = reference_join(r, s);
    std::sort(expected.begin(), expected.end());
  }

  auto run_algo = [&](const char* name, auto&& fn) {
    if (!wants(cfg.algorithm, name)) {
      return;
    }
    fabric::Fabric fabric(cfg.olap_nodes, cfg.latency);
    auto ctx = make_context(fabric, cfg);
    auto t0 = std::chrono::steady_clock::now();
    olap::JoinResult res = fn(ctx);
    JoinAlgoReport row;
    row.algorithm = name;
    row.wall_ms = elapsed_ms(t0);
    row.result_cardinality = res.matches.size();
    row.stats = res.stats;
    if (do_verify) {
      std::sort(res.matches.begin(), res.matches.end());
      row.verified = res.matches == expected;
      report.verdicts.push_back(
          {std::string(name) + "-matches-reference", row.verified,
           "cardinality " + std::to_string(res.matches.size()) + " vs " +
               std::to_string(expected.size())});
    }
    report.joins.push_back(std::move(row));
  };

  run_algo("ghj", [&](olap::OlapContext& ctx) {
    return olap::ghj(ctx, r, s, cfg.transport);
  });
  run_algo("ghj_bloom", [&](olap::OlapContext& ctx) {
    return olap::ghj_bloom(ctx, r, s, cfg.bloom_eps, cfg.transport);
  });
  run_algo("rdma_ghj", [&](olap::OlapContext& ctx) {
    return olap::rdma_ghj(ctx, r, s);
  });
  run_algo("rrj", [&](olap::OlapContext& ctx) { return olap::rrj(ctx, r, s); });

  if (report.joins.size() > 1) {
    bool same = true;
    for (const auto& row : report.joins) {
      same = same && row.result_cardinality == report.joins[0].result_cardinality;
    }
    report.verdicts.push_back({"identical-cardinality", same, ""});
  }
  return report;
}

OlapReport run_olap_agg(const ExperimentConfig& cfg) {
  OlapReport report;
  olap::AggFn fn = olap::AggFn::kSum;
  if (!olap::parse_agg_fn(cfg.agg_fn, &fn)) {
    throw std::invalid_argument("unknown agg_fn: " + cfg.agg_fn);
  }
  olap::Relation r = gen_agg_relation(cfg.seed, cfg.relation_tuples,
                                      std::max<std::uint64_t>(cfg.distinct_keys, 1),
                                      cfg.olap_nodes);
  bool do_verify = cfg.verify && cfg.relation_tuples <= cfg.oracle_cap;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> expected;
  if (do_verify) {
    expected = reference_agg(r, fn);
  }

  auto run_algo = [&](const char* name, auto&& impl) {
    if (!wants(cfg.algorithm, name)) {
      return;
    }
    fabric::Fabric fabric(cfg.olap_nodes, cfg.latency);
    auto ctx = make_context(fabric, cfg);
    auto t0 = std::chrono::steady_clock::now();
    olap::AggResult res = impl(ctx);
    AggAlgoReport row;
    row.algorithm = name;
    row.wall_ms = elapsed_ms(t0);
    row.groups = res.groups.size();
    row.stats = res.stats;
    if (do_verify) {
      row.verified = res.groups == expected;
      report.verdicts.push_back(
          {std::string(name) + "-matches-reference", row.verified,
           std::to_string(res.groups.size()) + " groups vs " +
               std::to_string(expected.size())});
    }
    report.aggs.push_back(std::move(row));
  };

  run_algo("hierarchical", [&](olap::OlapContext& ctx) {
    return olap::agg_hierarchical(ctx, r, fn, cfg.transport);
  });
  run_algo("rdma", [&](olap::OlapContext& ctx) {
    return olap::agg_rdma(ctx, r, fn);
  });
  return report;
}

void run_costmodel(const ExperimentConfig& cfg, std::ostream& csv,
                   std::ostream& summary) {
  costmodel::CostParams params;
  params.bloom_eps = cfg.bloom_eps;
  costmodel::RelationShape shape{1e6, 8};
  std::vector<double> grid;
  std::uint64_t points = std::max<std::uint64_t>(cfg.curve_points, 2);
  for (std::uint64_t i = 0; i < points; ++i) {
    grid.push_back(static_cast<double>(i) / static_cast<double>(points - 1));
  }
  auto rows = costmodel::emit_cost_curves(shape, shape, grid, params);
  costmodel::write_curves_csv(csv, rows);

  summary << "bound,value\n";
  summary << "trx_upper_bound_n3,"
          << costmodel::trx_upper_bound(8, 2.2e9, 3, 3750) << '\n';
  summary << "trx_upper_bound_n4,"
          << costmodel::trx_upper_bound(8, 2.2e9, 4, 3750) << '\n';
  summary << "bandwidth_bound_10gbe,"
          << costmodel::bandwidth_bound(1.25 * 1024 * 1024 * 1024, 6 * 1024)
          << '\n';
  summary << "rsi_bandwidth_ceiling,"
          << costmodel::bandwidth_bound(13.8e9, 6 * 1024) << '\n';
  summary << "crossover_sel_eff_rdma,"
          << costmodel::crossover_sel_eff(fabric::Transport::kRdma, params)
          << '\n';
  summary << "crossover_sel_eff_ipoib,"
          << costmodel::crossover_sel_eff(fabric::Transport::kIpoIb, params)
          << '\n';
  summary << "crossover_sel_eff_ipoeth,"
          << costmodel::crossover_sel_eff(fabric::Transport::kIpoEth, params)
          << '\n';
}

}  // namespace namdb::bench
