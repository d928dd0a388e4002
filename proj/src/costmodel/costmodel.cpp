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

#include "namdb/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace namdb::costmodel {

double CostParams::c_net(Transport t) const {
  switch (t) {
    case Transport::kRdma:
      return c_net_rdma;
    case Transport::kIpoIb:
      return c_net_ipoib;
    case Transport::kIpoEth:
      return c_net_ipoeth;
  }
  return 0;
}

double t_mem(const RelationShape& r, const CostParams& p) {
  return r.bytes() * p.c_mem;
}

double t_net(const RelationShape& r, Transport t, const CostParams& p) {
  return r.bytes() * p.c_net(t);
}

double t_part(const RelationShape& r, Transport t, const CostParams& p) {
  return r.bytes() * (2 * p.c_mem + p.c_net(t));
}

double t_join_local(const RelationShape& r, const RelationShape& s,
                    const CostParams& p) {
  return 2 * p.c_mem * (r.bytes() + s.bytes());
}

double t_ghj(const RelationShape& r, const RelationShape& s, Transport t,
             const CostParams& p) {
  return (r.bytes() + s.bytes()) * (4 * p.c_mem + p.c_net(t));
}

double effective_selectivity(double sel, double eps) {
  return std::min(1.0, sel + eps);
}

double t_ghj_bloom(const RelationShape& r, const RelationShape& s, double sel,
                   Transport t, const CostParams& p) {
  double se = effective_selectivity(sel, p.bloom_eps);
  return (r.bytes() + s.bytes()) *
         (p.c_mem + 4 * se * p.c_mem + se * p.c_net(t));
}

double t_rdma_ghj(const RelationShape& r, const RelationShape& s,
                  const CostParams& p) {
  return t_mem(r, p) + t_mem(s, p) + t_join_local(r, s, p);
}

double t_rrj(const RelationShape& r, const RelationShape& s,
             const CostParams& p) {
  return 2 * p.c_mem * (r.bytes() + s.bytes());
}

double crossover_sel_eff(Transport t, const CostParams& p) {
  return (3 * p.c_mem + p.c_net(t)) / (4 * p.c_mem + p.c_net(t));
}

double conflict_probability(double lambda, double service_seconds,
                            int n_records) {
  if (n_records < 1) {
    throw std::invalid_argument("need at least one record");
  }
  double x = 6.0 * lambda * service_seconds;
  if (x >= 1.0) {
    throw std::domain_error("conflict model requires 6*lambda*t < 1");
  }
  return 1.0 - std::pow(1.0 - x, n_records);
}

double trx_upper_bound(double cores, double cycles_per_core, double n_nodes,
                       double cycles_per_message) {
  if (cores <= 0 || cycles_per_core <= 0 || n_nodes <= 0 ||
      cycles_per_message <= 0) {
    throw std::invalid_argument("parameters must be positive");
  }
  return (cores * cycles_per_core * (n_nodes + 1)) /
         ((5 + 8 * n_nodes) * cycles_per_message);
}

double bandwidth_bound(double bandwidth_bytes_per_s, double bytes_per_txn) {
  if (bandwidth_bytes_per_s <= 0 || bytes_per_txn <= 0) {
    throw std::invalid_argument("parameters must be positive");
  }
  return bandwidth_bytes_per_s / bytes_per_txn;
}

std::vector<CurveRow> emit_cost_curves(const RelationShape& r,
                                       const RelationShape& s,
                                       const std::vector<double>& sel_grid,
                                       const CostParams& p) {
  std::vector<CurveRow> rows;
  const Transport transports[] = {Transport::kIpoEth, Transport::kIpoIb,
                                  Transport::kRdma};
  for (Transport t : transports) {
    for (double sel : sel_grid) {
      rows.push_back({sel, "ghj", to_string(t), t_ghj(r, s, t, p)});
    }
  }
  for (Transport t : transports) {
    for (double sel : sel_grid) {
      rows.push_back({sel, "ghj_bloom", to_string(t), t_ghj_bloom(r, s, sel, t, p)});
    }
  }
  for (double sel : sel_grid) {
    rows.push_back({sel, "rdma_ghj", "rdma", t_rdma_ghj(r, s, p)});
  }
  for (double sel : sel_grid) {
    rows.push_back({sel, "rrj", "rdma", t_rrj(r, s, p)});
  }
  return rows;
}

void write_curves_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
  os << "sel,algorithm,transport,cost_seconds\n";
  for (const auto& row : rows) {
    os << row.sel << ',' << row.algorithm << ',' << row.transport << ','
       << row.cost_seconds << '\n';
  }
}

}  // namespace namdb::costmodel
