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
#include <atomic>
#include <limits>
#include <unordered_map>

#include "namdb/kernels.hpp"
#include "namdb/olap.hpp"
#include "olap/internal.hpp"

namespace namdb::olap {

using internal::next_pow2;
using internal::run_workers;

const char* to_string(AggFn fn) {
  switch (fn) {
    case AggFn::kSum:
      return "sum";
    case AggFn::kCount:
      return "count";
    case AggFn::kMin:
      return "min";
    case AggFn::kMax:
      return "max";
  }
  return "?";
}

bool parse_agg_fn(const std::string& s, AggFn* out) {
  if (s == "sum") {
    *out = AggFn::kSum;
  } else if (s == "count") {
    *out = AggFn::kCount;
  } else if (s == "min") {
    *out = AggFn::kMin;
  } else if (s == "max") {
    *out = AggFn::kMax;
  } else {
    return false;
  }
  return true;
}

namespace {

// Folding a raw value into an accumulator, and combining two partials.
std::uint64_t fold_init(AggFn fn, std::uint64_t value) {
  return fn == AggFn::kCount ? 1 : value;
}

std::uint64_t combine(AggFn fn, std::uint64_t a, std::uint64_t b) {
  switch (fn) {
    case AggFn::kSum:
    case AggFn::kCount:
      return a + b;
    case AggFn::kMin:
      return std::min(a, b);
    case AggFn::kMax:
      return std::max(a, b);
  }
  return 0;
}

using GroupMap = std::unordered_map<std::uint64_t, std::uint64_t>;

void fold_tuple(GroupMap& map, AggFn fn, std::uint64_t group,
                std::uint64_t value) {
  auto [it, inserted] = map.emplace(group, fold_init(fn, value));
  if (!inserted) {
    it->second = combine(fn, it->second, fold_init(fn, value));
  }
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> sorted_groups(
    const GroupMap& map) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out(map.begin(),
                                                           map.end());
  std::sort(out.begin(), out.end());
  return out;
}

void require_agg_input(const OlapContext& ctx, const Relation& r) {
  if (!r.has_payload()) {
    throw std::invalid_argument("aggregation input needs 16-byte tuples");
  }
  if (r.parts.size() != ctx.nodes.size()) {
    throw std::invalid_argument("relation partition count != node count");
  }
}

}  // namespace

AggResult agg_hierarchical(OlapContext& ctx, const Relation& r, AggFn fn,
                           Transport transport) {
  require_agg_input(ctx, r);
  std::size_t p = ctx.nodes.size();
  std::vector<std::unique_ptr<fabric::Session>> sessions;
  for (std::size_t i = 0; i < p; ++i) {
    sessions.push_back(ctx.fabric->create_session(ctx.nodes[i]));
  }

  // Phase 1: local aggregation per node.
  std::vector<GroupMap> local(p);
  run_workers(p, [&](std::size_t w) {
    const auto& part = r.parts[w];
    for (std::size_t i = 0; i < part.keys.size(); ++i) {
      fold_tuple(local[w], fn, part.keys[i], part.payloads[i]);
    }
  });

  // Phase 2: global union at node 0, then post-aggregation.
  AggResult result;
  result.stats.workers = p;
  for (const auto& m : local) {
    result.stats.union_rows_shipped += m.size();
  }
  if (p == 1) {
    result.groups = sorted_groups(local[0]);
    return result;
  }
  std::vector<fabric::Qp*> to_zero(p, nullptr);
  std::vector<fabric::Qp*> at_zero(p, nullptr);
  for (std::size_t i = 1; i < p; ++i) {
    auto [a, b] =
        ctx.fabric->create_channel(*sessions[0], *sessions[i], transport);
    at_zero[i] = a;
    to_zero[i] = b;
  }
  std::size_t chunk = ctx.config.shuffle_chunk_bytes;
  for (std::size_t i = 1; i < p; ++i) {
    std::size_t bytes = local[i].size() * 16;
    for (std::size_t n = (bytes + chunk - 1) / chunk; n > 0; --n) {
      at_zero[i]->post_receive();
    }
  }
  GroupMap merged = std::move(local[0]);
  run_workers(p, [&](std::size_t w) {
    if (w == 0) {
      std::size_t expected = 0;
      for (std::size_t i = 1; i < p; ++i) {
        expected += (local[i].size() * 16 + chunk - 1) / chunk;
      }
      while (expected > 0) {
        auto c = sessions[0]->recv_blocking(60.0);
        if (!c) {
          throw std::runtime_error("aggregation union timed out");
        }
        for (std::size_t off = 0; off + 16 <= c->data.size(); off += 16) {
          std::uint64_t group = fabric::load_u64(c->data.data() + off);
          std::uint64_t partial = fabric::load_u64(c->data.data() + off + 8);
          auto [it, inserted] = merged.emplace(group, partial);
          if (!inserted) {
            it->second = combine(fn, it->second, partial);
          }
        }
        --expected;
      }
      return;
    }
    std::vector<std::uint8_t> buf;
    buf.reserve(chunk);
    for (const auto& [group, partial] : local[w]) {
      std::uint8_t rec[16];
      fabric::store_u64(rec, group);
      fabric::store_u64(rec + 8, partial);
      buf.insert(buf.end(), rec, rec + 16);
      if (buf.size() + 16 > chunk) {
        sessions[w]->send(*to_zero[w], buf, false);
        buf.clear();
      }
    }
    if (!buf.empty()) {
      sessions[w]->send(*to_zero[w], buf, false);
    }
  });
  result.groups = sorted_groups(merged);
  return result;
}

// ---------------------------------------------------------------------------
// RDMA aggregation

namespace {

// Fixed-capacity open-addressing table; the caller spills and clears it
// when an insert would exceed capacity.
class CoreCacheTable {
 public:
  explicit CoreCacheTable(std::size_t capacity)
      : capacity_(capacity), mask_(next_pow2(capacity * 2) - 1) {
    slots_.assign(mask_ + 1, kEmpty);
    values_.assign(mask_ + 1, 0);
  }

  // Returns false when full and the group is not present.
  bool fold(AggFn fn, std::uint64_t group, std::uint64_t value) {
    std::size_t idx = kernels::hash64(group, 0x17) & mask_;
    while (true) {
      if (slots_[idx] == kEmpty) {
        if (size_ == capacity_) {
          return false;
        }
        slots_[idx] = group;
        values_[idx] = fold_init(fn, value);
        ++size_;
        return true;
      }
      if (slots_[idx] == group) {
        values_[idx] = combine(fn, values_[idx], fold_init(fn, value));
        return true;
      }
      idx = (idx + 1) & mask_;
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i <= mask_; ++i) {
      if (slots_[i] != kEmpty) {
        fn(slots_[i], values_[i]);
      }
    }
  }

  void clear() {
    std::fill(slots_.begin(), slots_.end(), kEmpty);
    size_ = 0;
  }

  std::size_t size() const { return size_; }

 private:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  std::size_t capacity_;
  std::size_t mask_;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> slots_;
  std::vector<std::uint64_t> values_;
};

}  // namespace

AggResult agg_rdma(OlapContext& ctx, const Relation& r, AggFn fn) {
  require_agg_input(ctx, r);
  std::size_t p = ctx.nodes.size();
  // Strictly more phase-2 partitions than workers, for skew robustness.
  std::size_t partitions = next_pow2(2 * p);
  AggResult result;
  result.stats.workers = p;
  result.stats.partitions = partitions;

  std::vector<std::unique_ptr<fabric::Session>> sessions;
  for (std::size_t i = 0; i < p; ++i) {
    sessions.push_back(ctx.fabric->create_session(ctx.nodes[i]));
  }

  // Overflow regions per (worker, partition): worst case every input
  // tuple plus a final table drain, 16 bytes per record.
  std::vector<std::vector<SoftwareManagedBuffers::Target>> targets(p);
  for (std::size_t w = 0; w < p; ++w) {
    std::uint64_t bound =
        (r.parts[w].keys.size() + ctx.config.agg_table_entries + 1) * 16;
    for (std::size_t f = 0; f < partitions; ++f) {
      auto region = ctx.fabric->register_region(ctx.nodes[f % p], bound);
      targets[w].push_back({region.at(0), bound});
    }
  }

  std::vector<std::uint64_t> written(p * partitions, 0);
  std::atomic<std::uint64_t> overflow_flushes{0};
  run_workers(p, [&](std::size_t w) {
    SoftwareManagedBuffers smb(*sessions[w], targets[w], ctx.config);
    CoreCacheTable table(ctx.config.agg_table_entries);
    auto spill = [&] {
      table.for_each([&](std::uint64_t group, std::uint64_t partial) {
        std::uint8_t rec[16];
        fabric::store_u64(rec, group);
        fabric::store_u64(rec + 8, partial);
        smb.append(kernels::hash64(group, ctx.config.hash_seed) % partitions,
                   rec, 16);
      });
      table.clear();
    };
    const auto& part = r.parts[w];
    for (std::size_t i = 0; i < part.keys.size(); ++i) {
      if (!table.fold(fn, part.keys[i], part.payloads[i])) {
        // Pre-aggregation table full: stream it out in the background and
        // keep aggregating.
        overflow_flushes.fetch_add(1, std::memory_order_relaxed);
        spill();
        table.fold(fn, part.keys[i], part.payloads[i]);
      }
    }
    spill();  // final drain
    smb.finish();
    for (std::size_t f = 0; f < partitions; ++f) {
      written[w * partitions + f] = smb.bytes_written(f);
    }
  });
  result.stats.overflow_flushes = overflow_flushes.load();

  // Phase 2: post-aggregate the partitions in parallel; group disjointness
  // across partitions makes the final union a concatenation.
  std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> out(p);
  run_workers(p, [&](std::size_t w) {
    for (std::size_t f = w; f < partitions; f += p) {
      GroupMap map;
      for (std::size_t src = 0; src < p; ++src) {
        std::uint64_t bytes = written[src * partitions + f];
        if (bytes == 0) {
          continue;
        }
        auto data = sessions[w]->read(targets[src][f].base, bytes);
        for (std::size_t off = 0; off + 16 <= data.size(); off += 16) {
          std::uint64_t group = fabric::load_u64(data.data() + off);
          std::uint64_t partial = fabric::load_u64(data.data() + off + 8);
          auto [it, inserted] = map.emplace(group, partial);
          if (!inserted) {
            it->second = combine(fn, it->second, partial);
          }
        }
      }
      auto rows = sorted_groups(map);
      out[w].insert(out[w].end(), rows.begin(), rows.end());
    }
  });
  for (auto& rows : out) {
    result.groups.insert(result.groups.end(), rows.begin(), rows.end());
  }
  std::sort(result.groups.begin(), result.groups.end());
  return result;
}

}  // namespace namdb::olap
