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

#include <atomic>
#include <cstring>
#include <numeric>

#include "namdb/kernels.hpp"
#include "namdb/olap.hpp"
#include "olap/internal.hpp"

namespace namdb::olap {

using internal::decode_tuples;
using internal::encode_tuple;
using internal::next_pow2;
using internal::run_workers;

// ---------------------------------------------------------------------------
// Software-managed buffers

SoftwareManagedBuffers::SoftwareManagedBuffers(fabric::Session& session,
                                               std::vector<Target> targets,
                                               const OlapConfig& cfg)
    : session_(session),
      targets_(std::move(targets)),
      flush_bytes_(cfg.flush_bytes),
      signal_interval_(cfg.signal_interval) {
  if (targets_.size() * flush_bytes_ > cfg.l3_budget_bytes) {
    throw std::invalid_argument(
        "partition fan-out exceeds the L3 buffer budget");
  }
  staging_.resize(targets_.size());
  offsets_.assign(targets_.size(), 0);
  for (auto& s : staging_) {
    s.reserve(flush_bytes_);
  }
}

void SoftwareManagedBuffers::flush(std::size_t part, bool force_signal) {
  auto& buf = staging_[part];
  if (buf.empty()) {
    return;
  }
  if (offsets_[part] + buf.size() > targets_[part].capacity) {
    throw std::runtime_error("partition output region overflow");
  }
  bool signal = force_signal || (++flushes_since_signal_ >= signal_interval_);
  fabric::RemoteAddress dst = targets_[part].base;
  dst.offset += offsets_[part];
  if (signal) {
    flushes_since_signal_ = 0;
    session_.qp_to(dst.node).post_write(dst, buf, true);
    ++signaled_;
  } else {
    session_.write_unsignaled(dst, buf);
    ++unsignaled_;
  }
  offsets_[part] += buf.size();
  max_payload_ = std::max<std::uint64_t>(max_payload_, buf.size());
  buf.clear();
}

void SoftwareManagedBuffers::append(std::size_t part,
                                    const std::uint8_t* record,
                                    std::size_t record_len) {
  auto& buf = staging_[part];
  if (buf.size() + record_len > flush_bytes_) {
    flush(part, false);
  }
  buf.insert(buf.end(), record, record + record_len);
}

void SoftwareManagedBuffers::finish() {
  for (std::size_t part = 0; part < staging_.size(); ++part) {
    flush(part, true);
  }
  // Selective signaling: drain the signaled completions; the final
  // signaled flush per queue pair implies all earlier WQEs applied.
  auto completions = session_.send_cq().poll(SIZE_MAX);
  for (const auto& c : completions) {
    if (c.status != fabric::CompletionStatus::kOk) {
      throw fabric::FabricError("partition flush failed");
    }
    session_.advance_clock(c.vtime);
  }
}

// ---------------------------------------------------------------------------
// Two-sided shuffle (grace hash join, with optional Bloom reduction)

namespace {

struct Channels {
  // qp[i][j]: worker i's end of the channel to worker j (i != j).
  std::vector<std::vector<fabric::Qp*>> qp;
};

Channels make_mesh(OlapContext& ctx,
                   std::vector<std::unique_ptr<fabric::Session>>& sessions,
                   Transport transport) {
  std::size_t p = sessions.size();
  Channels ch;
  ch.qp.assign(p, std::vector<fabric::Qp*>(p, nullptr));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      auto [a, b] = ctx.fabric->create_channel(*sessions[i], *sessions[j],
                                               transport);
      ch.qp[i][j] = a;
      ch.qp[j][i] = b;
    }
  }
  return ch;
}

std::size_t tuples_per_chunk(std::size_t chunk_bytes, std::size_t width) {
  return std::max<std::size_t>(1, chunk_bytes / width);
}

std::size_t chunks_for(std::uint64_t tuples, std::size_t per_chunk) {
  return static_cast<std::size_t>((tuples + per_chunk - 1) / per_chunk);
}

// Sends one relation pass: partitions the local part, retains the local
// fraction, ships the rest in raw-tuple chunks, then collects the expected
// inbound chunks. counts[i][j] = tuples worker i sends to j.
void shuffle_pass(OlapContext& ctx, const Relation& rel, Channels& ch,
                  std::vector<std::unique_ptr<fabric::Session>>& sessions,
                  std::size_t w,
                  const std::vector<std::vector<std::uint64_t>>& counts,
                  const BloomFilter* filter, TupleVec* local_out) {
  std::size_t p = sessions.size();
  std::size_t width = rel.tuple_width;
  std::size_t per_chunk = tuples_per_chunk(ctx.config.shuffle_chunk_bytes, width);
  bool hp = rel.has_payload();

  const auto& part = rel.parts[w];
  std::vector<std::vector<std::uint8_t>> out_buf(p);
  for (auto& b : out_buf) {
    b.reserve(per_chunk * width);
  }
  std::vector<std::uint64_t> hashes(part.keys.size());
  kernels::hash64_batch(part.keys.data(), hashes.data(), part.keys.size(),
                        ctx.config.hash_seed);
  std::uint8_t rec[16];
  for (std::size_t i = 0; i < part.keys.size(); ++i) {
    if (filter != nullptr && !filter->contains(part.keys[i])) {
      continue;
    }
    std::size_t dst = hashes[i] % p;
    std::uint64_t payload = hp ? part.payloads[i] : 0;
    if (dst == w) {
      local_out->append(part.keys[i], payload, hp);
      continue;
    }
    encode_tuple(rec, part.keys[i], payload, hp);
    auto& buf = out_buf[dst];
    buf.insert(buf.end(), rec, rec + width);
    if (buf.size() >= per_chunk * width) {
      sessions[w]->send(*ch.qp[w][dst], buf, false);
      buf.clear();
    }
  }
  for (std::size_t dst = 0; dst < p; ++dst) {
    if (dst != w && !out_buf[dst].empty()) {
      sessions[w]->send(*ch.qp[w][dst], out_buf[dst], false);
    }
  }

  std::size_t expected = 0;
  for (std::size_t src = 0; src < p; ++src) {
    if (src != w) {
      expected += chunks_for(counts[src][w], per_chunk);
    }
  }
  while (expected > 0) {
    auto c = sessions[w]->recv_blocking(60.0);
    if (!c) {
      throw std::runtime_error("shuffle receive timed out");
    }
    decode_tuples(c->data.data(), c->data.size(), hp, local_out);
    --expected;
  }
}

// Pre-posts the receive slots worker w needs for one relation pass.
void post_pass_tokens(Channels& ch, std::size_t p, std::size_t w,
                      const std::vector<std::vector<std::uint64_t>>& counts,
                      std::size_t per_chunk) {
  for (std::size_t src = 0; src < p; ++src) {
    if (src == w) {
      continue;
    }
    std::size_t n = chunks_for(counts[src][w], per_chunk);
    for (std::size_t i = 0; i < n; ++i) {
      ch.qp[w][src]->post_receive();
    }
  }
}

JoinResult ghj_impl(OlapContext& ctx, const Relation& r, const Relation& s,
                    Transport transport, const double* bloom_eps) {
  std::size_t p = ctx.nodes.size();
  if (r.parts.size() != p || s.parts.size() != p) {
    throw std::invalid_argument("relation partition count != node count");
  }
  std::vector<std::unique_ptr<fabric::Session>> sessions;
  for (std::size_t i = 0; i < p; ++i) {
    sessions.push_back(ctx.fabric->create_session(ctx.nodes[i]));
  }
  Channels ch = make_mesh(ctx, sessions, transport);

  JoinResult result;
  std::barrier barrier(static_cast<std::ptrdiff_t>(p));

  // Optional semi-join reduction: build per-node filters over the join
  // keys, broadcast, and OR-merge so every worker holds the global filter.
  std::vector<BloomFilter> r_filters;   // filter of R keys, per worker
  std::vector<BloomFilter> s_filters;
  std::atomic<std::uint64_t> filter_bytes{0};
  std::atomic<std::uint64_t> filtered_out{0};
  if (bloom_eps != nullptr) {
    for (std::size_t i = 0; i < p; ++i) {
      r_filters.emplace_back(r.total_tuples(), *bloom_eps, ctx.config.hash_seed + 1);
      s_filters.emplace_back(s.total_tuples(), *bloom_eps, ctx.config.hash_seed + 2);
    }
    std::size_t chunk = ctx.config.shuffle_chunk_bytes;
    auto broadcast = [&](std::vector<BloomFilter>& filters, std::size_t w) {
      const auto& mine = filters[w].bytes();
      std::size_t n_chunks = (mine.size() + chunk - 1) / chunk;
      for (std::size_t src = 0; src < p; ++src) {
        if (src != w) {
          for (std::size_t i = 0; i < n_chunks; ++i) {
            ch.qp[w][src]->post_receive();
          }
        }
      }
      barrier.arrive_and_wait();
      for (std::size_t dst = 0; dst < p; ++dst) {
        if (dst == w) {
          continue;
        }
        for (std::size_t off = 0; off < mine.size(); off += chunk) {
          std::size_t len = std::min(chunk, mine.size() - off);
          sessions[w]->send(
              *ch.qp[w][dst],
              std::span(mine.data() + off, len), false);
          filter_bytes.fetch_add(len, std::memory_order_relaxed);
        }
      }
      // Collect peers' partial filters; chunks arrive in order per queue
      // pair, so a per-sender cursor reassembles them.
      std::vector<std::vector<std::uint8_t>> partial(p);
      std::size_t expected = (p - 1) * n_chunks;
      while (expected > 0) {
        auto c = sessions[w]->recv_blocking(60.0);
        if (!c) {
          throw std::runtime_error("filter broadcast timed out");
        }
        for (std::size_t src = 0; src < p; ++src) {
          if (src != w && ch.qp[w][src]->id() == c->qp_id) {
            partial[src].insert(partial[src].end(), c->data.begin(),
                                c->data.end());
            break;
          }
        }
        --expected;
      }
      for (std::size_t src = 0; src < p; ++src) {
        if (src != w) {
          filters[w].merge_bytes(partial[src]);
        }
      }
      barrier.arrive_and_wait();
    };
    run_workers(p, [&](std::size_t w) {
      for (std::size_t i = 0; i < r.parts[w].keys.size(); ++i) {
        r_filters[w].insert(r.parts[w].keys[i]);
      }
      for (std::size_t i = 0; i < s.parts[w].keys.size(); ++i) {
        s_filters[w].insert(s.parts[w].keys[i]);
      }
      broadcast(r_filters, w);
      broadcast(s_filters, w);
    });
  }

  // Exact per-pair tuple counts (after filtering) size the receive queues
  // and the shuffle accounting.
  std::vector<std::vector<std::uint64_t>> counts_r(
      p, std::vector<std::uint64_t>(p, 0));
  std::vector<std::vector<std::uint64_t>> counts_s = counts_r;
  run_workers(p, [&](std::size_t w) {
    auto count = [&](const Relation& rel, const BloomFilter* f,
                     std::vector<std::uint64_t>& row) {
      const auto& part = rel.parts[w];
      std::vector<std::uint64_t> hashes(part.keys.size());
      kernels::hash64_batch(part.keys.data(), hashes.data(), part.keys.size(),
                            ctx.config.hash_seed);
      for (std::size_t i = 0; i < part.keys.size(); ++i) {
        if (f != nullptr && !f->contains(part.keys[i])) {
          filtered_out.fetch_add(1, std::memory_order_relaxed);
          continue;
        }
        row[hashes[i] % p] += 1;
      }
    };
    // R is reduced by the filter over S's keys and vice versa.
    count(r, bloom_eps ? &s_filters[w] : nullptr, counts_r[w]);
    count(s, bloom_eps ? &r_filters[w] : nullptr, counts_s[w]);
  });

  std::vector<std::vector<Match>> worker_matches(p);
  run_workers(p, [&](std::size_t w) {
    std::size_t per_chunk_r = tuples_per_chunk(ctx.config.shuffle_chunk_bytes,
                                               r.tuple_width);
    std::size_t per_chunk_s = tuples_per_chunk(ctx.config.shuffle_chunk_bytes,
                                               s.tuple_width);
    post_pass_tokens(ch, p, w, counts_r, per_chunk_r);
    barrier.arrive_and_wait();
    TupleVec local_r;
    shuffle_pass(ctx, r, ch, sessions, w, counts_r,
                 bloom_eps ? &s_filters[w] : nullptr, &local_r);
    barrier.arrive_and_wait();
    post_pass_tokens(ch, p, w, counts_s, per_chunk_s);
    barrier.arrive_and_wait();
    TupleVec local_s;
    shuffle_pass(ctx, s, ch, sessions, w, counts_s,
                 bloom_eps ? &r_filters[w] : nullptr, &local_s);
    barrier.arrive_and_wait();
    worker_matches[w] = local_radix_join(local_r, local_s, ctx.config);
  });

  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (i != j) {
        result.stats.tuples_shuffled += counts_r[i][j] + counts_s[i][j];
        result.stats.bytes_shuffled +=
            counts_r[i][j] * r.tuple_width + counts_s[i][j] * s.tuple_width;
      }
    }
  }
  result.stats.filter_bytes_broadcast = filter_bytes.load();
  result.stats.tuples_filtered_out = filtered_out.load();
  for (auto& m : worker_matches) {
    result.matches.insert(result.matches.end(), m.begin(), m.end());
  }
  result.stats.matches = result.matches.size();
  return result;
}

}  // namespace

JoinResult ghj(OlapContext& ctx, const Relation& r, const Relation& s,
               Transport transport) {
  return ghj_impl(ctx, r, s, transport, nullptr);
}

JoinResult ghj_bloom(OlapContext& ctx, const Relation& r, const Relation& s,
                     double eps, Transport transport) {
  return ghj_impl(ctx, r, s, transport, &eps);
}

// ---------------------------------------------------------------------------
// One-sided partitioned joins

namespace {

struct FabricInputs {
  std::vector<fabric::MemoryRegion> r_in, s_in;
};

// Stages the relation parts into per-node input regions ("storage side").
FabricInputs load_inputs(OlapContext& ctx, const Relation& r,
                         const Relation& s) {
  std::size_t p = ctx.nodes.size();
  FabricInputs in;
  auto loader = ctx.fabric->create_session(ctx.nodes[0]);
  auto load_one = [&](const Relation& rel, std::vector<fabric::MemoryRegion>& out) {
    for (std::size_t i = 0; i < p; ++i) {
      const auto& part = rel.parts[i];
      std::size_t bytes = std::max<std::size_t>(part.keys.size(), 1) *
                          rel.tuple_width;
      auto region = ctx.fabric->register_region(ctx.nodes[i], bytes);
      std::vector<std::uint8_t> buf(part.keys.size() * rel.tuple_width);
      for (std::size_t t = 0; t < part.keys.size(); ++t) {
        encode_tuple(buf.data() + t * rel.tuple_width, part.keys[t],
                     rel.has_payload() ? part.payloads[t] : 0,
                     rel.has_payload());
      }
      if (!buf.empty()) {
        loader->write(region.at(0), buf);
      }
      out.push_back(region);
    }
  };
  load_one(r, in.r_in);
  load_one(s, in.s_in);
  return in;
}

// Reads a whole input region and decodes it ("pre-fetch").
TupleVec prefetch(fabric::Session& session, const fabric::MemoryRegion& region,
                  std::size_t count, bool has_payload, std::size_t width) {
  TupleVec out;
  if (count == 0) {
    return out;
  }
  auto bytes = session.read(region.at(0), count * width);
  decode_tuples(bytes.data(), bytes.size(), has_payload, &out);
  return out;
}

double storage_target_cycles(const fabric::MetricsSnapshot& snap,
                             const std::vector<NodeId>& nodes) {
  double total = 0;
  for (NodeId n : nodes) {
    for (std::size_t t = 0; t < fabric::kNumTransports; ++t) {
      total += snap.nodes[n].cycles_target[t];
    }
  }
  return total;
}

// Shared frame for rdma_ghj (fan-out = p, then local radix join) and rrj
// (global radix fan-out F, then per-partition build/probe).
JoinResult one_sided_join(OlapContext& ctx, const Relation& r,
                          const Relation& s, std::size_t fanout,
                          bool per_partition_join) {
  std::size_t p = ctx.nodes.size();
  if (r.parts.size() != p || s.parts.size() != p) {
    throw std::invalid_argument("relation partition count != node count");
  }
  JoinResult result;
  FabricInputs inputs = load_inputs(ctx, r, s);

  std::vector<std::unique_ptr<fabric::Session>> sessions;
  for (std::size_t i = 0; i < p; ++i) {
    sessions.push_back(ctx.fabric->create_session(ctx.nodes[i]));
  }

  // Phase 0: pre-fetch inputs and build exact per-partition histograms.
  std::vector<TupleVec> r_local(p), s_local(p);
  std::vector<std::vector<std::uint64_t>> hist_r(
      p, std::vector<std::uint64_t>(fanout, 0));
  std::vector<std::vector<std::uint64_t>> hist_s = hist_r;
  run_workers(p, [&](std::size_t w) {
    r_local[w] = prefetch(*sessions[w], inputs.r_in[w], r.parts[w].keys.size(),
                          r.has_payload(), r.tuple_width);
    s_local[w] = prefetch(*sessions[w], inputs.s_in[w], s.parts[w].keys.size(),
                          s.has_payload(), s.tuple_width);
    auto hist = [&](const TupleVec& in, std::vector<std::uint64_t>& h) {
      std::vector<std::uint64_t> hashes(in.size());
      kernels::hash64_batch(in.keys.data(), hashes.data(), in.size(),
                            ctx.config.hash_seed);
      for (std::uint64_t hv : hashes) {
        h[hv % fanout] += 1;
      }
    };
    hist(r_local[w], hist_r[w]);
    hist(s_local[w], hist_s[w]);
  });

  // Reserve one region per (sender, partition); partition f lives on node
  // f mod p. Exact histogram sizing, so overflow cannot happen.
  auto reserve = [&](const Relation& rel,
                     const std::vector<std::vector<std::uint64_t>>& hist) {
    std::vector<std::vector<SoftwareManagedBuffers::Target>> targets(p);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t f = 0; f < fanout; ++f) {
        std::uint64_t bytes =
            std::max<std::uint64_t>(hist[i][f], 1) * rel.tuple_width;
        auto region = ctx.fabric->register_region(
            ctx.nodes[f % p], bytes);
        targets[i].push_back({region.at(0), bytes});
      }
    }
    return targets;
  };
  auto targets_r = reserve(r, hist_r);
  auto targets_s = reserve(s, hist_s);

  // Phase 1: remote radix partitioning with software-managed buffers;
  // only the sender CPUs are active.
  auto before = ctx.fabric->snapshot();
  std::vector<std::uint64_t> written_r(p * fanout, 0), written_s(p * fanout, 0);
  std::atomic<std::uint64_t> max_payload{0}, signaled{0}, unsignaled{0};
  std::atomic<std::uint64_t> tuples_moved{0}, bytes_moved{0};
  run_workers(p, [&](std::size_t w) {
    auto scatter = [&](const TupleVec& in, const Relation& rel,
                       std::vector<SoftwareManagedBuffers::Target> targets,
                       std::vector<std::uint64_t>* written) {
      SoftwareManagedBuffers smb(*sessions[w], std::move(targets), ctx.config);
      std::vector<std::uint64_t> hashes(in.size());
      kernels::hash64_batch(in.keys.data(), hashes.data(), in.size(),
                            ctx.config.hash_seed);
      bool hp = rel.has_payload();
      std::uint8_t rec[16];
      for (std::size_t i = 0; i < in.size(); ++i) {
        std::size_t f = hashes[i] % fanout;
        encode_tuple(rec, in.keys[i], hp ? in.payloads[i] : 0, hp);
        smb.append(f, rec, rel.tuple_width);
        if (f % p != w) {
          tuples_moved.fetch_add(1, std::memory_order_relaxed);
          bytes_moved.fetch_add(rel.tuple_width, std::memory_order_relaxed);
        }
      }
      smb.finish();
      for (std::size_t f = 0; f < fanout; ++f) {
        (*written)[w * fanout + f] = smb.bytes_written(f);
      }
      std::uint64_t seen = max_payload.load(std::memory_order_relaxed);
      while (seen < smb.max_payload() &&
             !max_payload.compare_exchange_weak(seen, smb.max_payload())) {
      }
      signaled.fetch_add(smb.signaled_flushes(), std::memory_order_relaxed);
      unsignaled.fetch_add(smb.unsignaled_flushes(), std::memory_order_relaxed);
    };
    scatter(r_local[w], r, targets_r[w], &written_r);
    scatter(s_local[w], s, targets_s[w], &written_s);
  });
  auto after = ctx.fabric->snapshot();
  result.stats.storage_cycles_partition =
      storage_target_cycles(after, ctx.nodes) -
      storage_target_cycles(before, ctx.nodes);

  // Phase 2: every worker pre-fetches its partitions and joins.
  std::vector<std::vector<Match>> worker_matches(p);
  run_workers(p, [&](std::size_t w) {
    auto fetch_partition = [&](std::size_t f, const Relation& rel,
                               const auto& targets,
                               const std::vector<std::uint64_t>& written) {
      TupleVec out;
      for (std::size_t src = 0; src < p; ++src) {
        std::uint64_t bytes = written[src * fanout + f];
        if (bytes == 0) {
          continue;
        }
        auto data = sessions[w]->read(targets[src][f].base, bytes);
        decode_tuples(data.data(), data.size(), rel.has_payload(), &out);
      }
      return out;
    };
    if (per_partition_join) {
      // Partitions are already cache-sized: direct build/probe each.
      for (std::size_t f = w; f < fanout; f += p) {
        TupleVec rf = fetch_partition(f, r, targets_r, written_r);
        TupleVec sf = fetch_partition(f, s, targets_s, written_s);
        internal::join_tuples(rf, sf, &worker_matches[w]);
      }
    } else {
      TupleVec r_all, s_all;
      for (std::size_t f = w; f < fanout; f += p) {
        TupleVec rf = fetch_partition(f, r, targets_r, written_r);
        TupleVec sf = fetch_partition(f, s, targets_s, written_s);
        r_all.keys.insert(r_all.keys.end(), rf.keys.begin(), rf.keys.end());
        r_all.payloads.insert(r_all.payloads.end(), rf.payloads.begin(),
                              rf.payloads.end());
        s_all.keys.insert(s_all.keys.end(), sf.keys.begin(), sf.keys.end());
        s_all.payloads.insert(s_all.payloads.end(), sf.payloads.begin(),
                              sf.payloads.end());
      }
      worker_matches[w] = local_radix_join(r_all, s_all, ctx.config);
    }
  });

  result.stats.tuples_shuffled = tuples_moved.load();
  result.stats.bytes_shuffled = bytes_moved.load();
  result.stats.max_write_payload = max_payload.load();
  result.stats.signaled_flushes = signaled.load();
  result.stats.unsignaled_flushes = unsignaled.load();
  for (auto& m : worker_matches) {
    result.matches.insert(result.matches.end(), m.begin(), m.end());
  }
  result.stats.matches = result.matches.size();
  return result;
}

}  // namespace

JoinResult rdma_ghj(OlapContext& ctx, const Relation& r, const Relation& s) {
  return one_sided_join(ctx, r, s, ctx.nodes.size(), false);
}

JoinResult rrj(OlapContext& ctx, const Relation& r, const Relation& s) {
  std::size_t p = ctx.nodes.size();
  // One partitioning pass: enough cache-sized blocks for the input, at
  // least one partition per node, bounded by the L3 buffer budget.
  std::size_t max_fanout = ctx.config.l3_budget_bytes / ctx.config.flush_bytes;
  std::size_t blocks_needed = next_pow2(std::max<std::size_t>(
      1, (r.total_bytes() + s.total_bytes()) / ctx.config.cache_block_bytes));
  std::size_t fanout = std::min(max_fanout, std::max(blocks_needed, next_pow2(p)));
  return one_sided_join(ctx, r, s, fanout, true);
}

}  // namespace namdb::olap
