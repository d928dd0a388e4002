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

#include "namdb/oracle.hpp"

#include <algorithm>

#include "namdb/kernels.hpp"

namespace namdb::oracle {

TimestampVector::TimestampVector(fabric::Fabric& fabric, fabric::NodeId host,
                                 std::uint32_t num_clients,
                                 std::uint64_t total_bits)
    : num_clients_(num_clients), total_bits_(total_bits) {
  if (num_clients_ == 0) {
    throw std::invalid_argument("need at least one client");
  }
  std::uint64_t max_slots = (total_bits_ + num_clients_ - 1) / num_clients_;
  stripe_bytes_ = static_cast<std::size_t>((max_slots + 7) / 8);
  region_ = fabric.register_region(
      host, static_cast<std::uint64_t>(stripe_bytes_) * num_clients_);
}

std::uint64_t TimestampVector::slots_of(std::uint32_t client) const {
  if (client < 1 || client > num_clients_ || client > total_bits_) {
    return 0;
  }
  return (total_bits_ - client) / num_clients_ + 1;
}

std::uint64_t TimestampVector::merge_rid(
    const std::vector<std::uint8_t>& bytes) const {
  // Per-client consecutive prefix lengths. With t = q*C + r (0 <= r < C),
  // bits 1..t are all set iff the first r clients have at least q+1
  // consecutive slots and the rest at least q.
  std::uint64_t q = UINT64_MAX;
  std::vector<std::uint64_t> prefix(num_clients_);
  for (std::uint32_t c = 0; c < num_clients_; ++c) {
    prefix[c] = kernels::prefix_ones(bytes.data() + c * stripe_bytes_,
                                     slots_of(c + 1));
    q = std::min(q, prefix[c]);
  }
  std::uint64_t r = 0;
  while (r < num_clients_ && prefix[r] > q) {
    ++r;
  }
  return q * num_clients_ + r;
}

OracleClient::OracleClient(TimestampVector& vec, fabric::Session& session,
                           std::uint32_t client_id)
    : vec_(vec), session_(session), client_id_(client_id) {
  if (client_id_ < 1 || client_id_ > vec_.num_clients()) {
    throw std::invalid_argument("client id out of range");
  }
  stripe_shadow_.assign(vec_.stripe_bytes(), 0);
}

std::uint64_t OracleClient::next_cid() {
  if (next_slot_ >= vec_.slots_of(client_id_)) {
    throw WouldWrap();
  }
  std::uint64_t cid = next_slot_ * vec_.num_clients() + client_id_;
  ++next_slot_;
  issued_upto_ = cid;
  return cid;
}

void OracleClient::publish_commit(std::uint64_t cid) {
  std::uint32_t c = vec_.num_clients();
  if (cid == 0 || (cid - 1) % c != client_id_ - 1 || cid > issued_upto_) {
    throw NotOwned();
  }
  std::uint64_t slot = (cid - 1) / c;
  std::size_t byte = static_cast<std::size_t>(slot / 8);
  stripe_shadow_[byte] |= static_cast<std::uint8_t>(1u << (slot % 8));
  fabric::RemoteAddress dst =
      vec_.region().at((client_id_ - 1) * vec_.stripe_bytes() + byte);
  session_.write_unsignaled(dst, std::span(&stripe_shadow_[byte], 1));
}

std::uint64_t OracleClient::current_rid() {
  auto bytes = session_.read(vec_.region().at(0), vec_.region().length);
  return vec_.merge_rid(bytes);
}

}  // namespace namdb::oracle
