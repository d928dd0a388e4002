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

#include <charconv>
#include <fstream>
#include <sstream>

#include "namdb/bench.hpp"

namespace namdb::bench {

std::uint64_t Rng::next() {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

double Rng::unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

CheckoutTxn gen_checkout_txn(Rng& rng, std::uint64_t products) {
  CheckoutTxn txn;
  for (std::size_t i = 0; i < txn.product_keys.size(); ++i) {
    bool fresh = false;
    while (!fresh) {
      txn.product_keys[i] = rng.below(products);
      fresh = true;
      for (std::size_t j = 0; j < i; ++j) {
        if (txn.product_keys[j] == txn.product_keys[i]) {
          fresh = false;
          break;
        }
      }
    }
  }
  txn.order_tag = rng.next();
  return txn;
}

std::vector<std::uint8_t> gen_payload(std::size_t bytes, std::uint64_t tag) {
  std::vector<std::uint8_t> out(bytes);
  Rng rng(tag);
  std::size_t i = 0;
  while (i + 8 <= bytes) {
    fabric::store_u64(out.data() + i, rng.next());
    i += 8;
  }
  for (; i < bytes; ++i) {
    out[i] = static_cast<std::uint8_t>(tag >> ((i % 8) * 8));
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_u64(const std::string& v, std::uint64_t* out) {
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), *out);
  return ec == std::errc() && p == v.data() + v.size();
}

bool parse_double(const std::string& v, double* out) {
  try {
    std::size_t pos = 0;
    *out = std::stod(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

// "8:1e-6;256:1e-6;..." -> anchor table
bool parse_anchors(const std::string& v,
                   std::vector<fabric::LatencyModel::Anchor>* out) {
  std::vector<fabric::LatencyModel::Anchor> anchors;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) {
      continue;
    }
    std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      return false;
    }
    double bytes = 0, seconds = 0;
    if (!parse_double(trim(item.substr(0, colon)), &bytes) ||
        !parse_double(trim(item.substr(colon + 1)), &seconds)) {
      return false;
    }
    anchors.push_back({bytes, seconds});
  }
  if (anchors.empty()) {
    return false;
  }
  *out = std::move(anchors);
  return true;
}

}  // namespace

std::optional<std::string> apply_config_line(ExperimentConfig& cfg,
                                             const std::string& raw) {
  std::string line = raw;
  std::size_t hash = line.find('#');
  if (hash != std::string::npos) {
    line = line.substr(0, hash);
  }
  line = trim(line);
  if (line.empty()) {
    return std::nullopt;
  }
  std::size_t eq = line.find('=');
  if (eq == std::string::npos) {
    return "expected `key = value`: " + raw;
  }
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));

  auto bad = [&]() -> std::optional<std::string> {
    return "bad value for " + key + ": " + value;
  };
  auto set_u64 = [&](std::uint64_t* field) -> std::optional<std::string> {
    return parse_u64(value, field) ? std::nullopt : bad();
  };
  auto set_u32 = [&](std::uint32_t* field) -> std::optional<std::string> {
    std::uint64_t v = 0;
    if (!parse_u64(value, &v) || v > UINT32_MAX) {
      return bad();
    }
    *field = static_cast<std::uint32_t>(v);
    return std::nullopt;
  };
  auto set_size = [&](std::size_t* field) -> std::optional<std::string> {
    std::uint64_t v = 0;
    if (!parse_u64(value, &v)) {
      return bad();
    }
    *field = static_cast<std::size_t>(v);
    return std::nullopt;
  };
  auto set_double = [&](double* field) -> std::optional<std::string> {
    return parse_double(value, field) ? std::nullopt : bad();
  };

  if (key == "workload") {
    cfg.workload = value;
  } else if (key == "protocol") {
    if (value != "rsi" && value != "trad") {
      return bad();
    }
    cfg.protocol = value;
  } else if (key == "algorithm") {
    cfg.algorithm = value;
  } else if (key == "transport") {
    if (!fabric::parse_transport(value, &cfg.transport)) {
      return bad();
    }
  } else if (key == "seed") {
    return set_u64(&cfg.seed);
  } else if (key == "storage_nodes") {
    return set_u32(&cfg.storage_nodes);
  } else if (key == "clients") {
    return set_u32(&cfg.clients);
  } else if (key == "products") {
    return set_u64(&cfg.products);
  } else if (key == "txns_per_client") {
    return set_u64(&cfg.txns_per_client);
  } else if (key == "product_payload_bytes") {
    return set_size(&cfg.product_payload_bytes);
  } else if (key == "insert_payload_bytes") {
    return set_size(&cfg.insert_payload_bytes);
  } else if (key == "timestamp_bits") {
    return set_u64(&cfg.timestamp_bits);
  } else if (key == "lock_retries") {
    std::uint64_t v = 0;
    if (!parse_u64(value, &v)) {
      return bad();
    }
    cfg.lock_retries = static_cast<int>(v);
  } else if (key == "olap_nodes") {
    return set_u32(&cfg.olap_nodes);
  } else if (key == "relation_tuples") {
    return set_u64(&cfg.relation_tuples);
  } else if (key == "selectivity") {
    return set_double(&cfg.selectivity);
  } else if (key == "bloom_eps") {
    return set_double(&cfg.bloom_eps);
  } else if (key == "distinct_keys") {
    return set_u64(&cfg.distinct_keys);
  } else if (key == "agg_fn") {
    cfg.agg_fn = value;
  } else if (key == "oracle_cap") {
    return set_u64(&cfg.oracle_cap);
  } else if (key == "verify") {
    cfg.verify = value == "1" || value == "true" || value == "yes";
  } else if (key == "curve_points") {
    return set_u64(&cfg.curve_points);
  } else if (key == "latency.rdma.write") {
    if (!parse_anchors(value, &cfg.latency.rdma_write)) return bad();
  } else if (key == "latency.rdma.read") {
    if (!parse_anchors(value, &cfg.latency.rdma_read)) return bad();
  } else if (key == "latency.ipoib") {
    if (!parse_anchors(value, &cfg.latency.ipoib)) return bad();
  } else if (key == "latency.ipoeth") {
    if (!parse_anchors(value, &cfg.latency.ipoeth)) return bad();
  } else if (key == "cycles.rdma") {
    return set_double(&cfg.latency.rdma_cycles);
  } else if (key == "cycles.ipoib") {
    return set_double(&cfg.latency.ipoib_cycles);
  } else if (key == "cycles.ipoeth") {
    return set_double(&cfg.latency.ipoeth_cycles);
  } else if (key == "tcp_window.ipoib") {
    return set_double(&cfg.latency.ipoib_tcp_window);
  } else if (key == "tcp_window.ipoeth") {
    return set_double(&cfg.latency.ipoeth_tcp_window);
  } else if (key == "cycles_per_second") {
    return set_double(&cfg.latency.cycles_per_second);
  } else {
    return "unknown config key: " + key;
  }
  return std::nullopt;
}

std::optional<std::string> load_config_file(ExperimentConfig& cfg,
                                            const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return "cannot open config file: " + path;
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto err = apply_config_line(cfg, line)) {
      return path + ":" + std::to_string(lineno) + ": " + *err;
    }
  }
  return std::nullopt;
}

}  // namespace namdb::bench
