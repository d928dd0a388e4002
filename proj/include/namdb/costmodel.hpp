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

#ifndef NAMDB_COSTMODEL_HPP_
#define NAMDB_COSTMODEL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "namdb/latency.hpp"

// Closed-form cost models for the distributed operators and protocols:
// scan/shuffle costs and the join variants, the M/M/1-style conflict
// likelihood, the per-message CPU throughput bound and the NIC bandwidth
// bound. All pure functions of CostParams.

namespace namdb::costmodel {

using fabric::Transport;

struct CostParams {
  double c_mem = 1e-9;  // seconds per byte of memory access
  // seconds per byte on the wire, per transport (saturation bandwidths:
  // 6.8 GB/s RDMA, 3.5 GB/s IPoIB, 1 Gbps Ethernet)
  double c_net_rdma = 1.0 / 6.8e9;
  double c_net_ipoib = 1.0 / 3.5e9;
  double c_net_ipoeth = 8e-9;
  double bloom_eps = 0.1;  // Bloom filter false-positive rate

  double c_net(Transport t) const;
};

struct RelationShape {
  double tuples = 0;
  double width = 8;  // bytes per tuple

  double bytes() const { return tuples * width; }
};

// Scan and transfer primitives.
double t_mem(const RelationShape& r, const CostParams& p);
double t_net(const RelationShape& r, Transport t, const CostParams& p);

// Repartitioning: read at the sender, wire transfer, materialize at the
// receiver: w*|R|*(2*c_mem + c_net).
double t_part(const RelationShape& r, Transport t, const CostParams& p);

// Local radix join, both phases memory-bound: 2*c_mem*(wr|R| + ws|S|).
double t_join_local(const RelationShape& r, const RelationShape& s,
                    const CostParams& p);

// Grace hash join: (wr|R| + ws|S|) * (4*c_mem + c_net).
double t_ghj(const RelationShape& r, const RelationShape& s, Transport t,
             const CostParams& p);

// Combined selectivity of a Bloom-filtered shuffle: min(1, sel + eps).
double effective_selectivity(double sel, double eps);

// Semi-join-reduced GHJ with sel_eff = min(1, sel+eps):
// (wr|R| + ws|S|) * (c_mem + 4*sel_eff*c_mem + sel_eff*c_net).
double t_ghj_bloom(const RelationShape& r, const RelationShape& s, double sel,
                   Transport t, const CostParams& p);

// One-sided shuffle variants: t_rdma_ghj = t_mem(R)+t_mem(S)+t_join_local;
// t_rrj = 2*c_mem*(wr|R| + ws|S|).
double t_rdma_ghj(const RelationShape& r, const RelationShape& s,
                  const CostParams& p);
double t_rrj(const RelationShape& r, const RelationShape& s,
             const CostParams& p);

// Effective selectivity at which the reduced join stops paying off:
// (3*c_mem + c_net) / (4*c_mem + c_net).
double crossover_sel_eff(Transport t, const CostParams& p);

// Conflict likelihood 1 - (1 - 6*lambda*t)^n for an M/M/1 service model;
// requires 6*lambda*t < 1.
double conflict_probability(double lambda, double service_seconds, int n_records);

// Optimistic transactions-per-second bound from per-message CPU cost:
// (c * cycles_c * (n+1)) / ((5 + 8n) * cycles_m).
double trx_upper_bound(double cores, double cycles_per_core, double n_nodes,
                       double cycles_per_message);

// NIC bandwidth bound: bytes/s divided by bytes moved per transaction.
double bandwidth_bound(double bandwidth_bytes_per_s, double bytes_per_txn);

struct CurveRow {
  double sel = 0;
  std::string algorithm;
  std::string transport;
  double cost_seconds = 0;
};

// Evaluates all join cost curves over a selectivity grid; deterministic
// row order (algorithm, transport, sel).
std::vector<CurveRow> emit_cost_curves(const RelationShape& r,
                                       const RelationShape& s,
                                       const std::vector<double>& sel_grid,
                                       const CostParams& p);

// Header "sel,algorithm,transport,cost_seconds".
void write_curves_csv(std::ostream& os, const std::vector<CurveRow>& rows);

}  // namespace namdb::costmodel

#endif  // NAMDB_COSTMODEL_HPP_
