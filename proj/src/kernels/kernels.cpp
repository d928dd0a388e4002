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

#include "namdb/kernels.hpp"

#include <bit>
#include <cstdlib>
#include <cstring>

namespace namdb::kernels {

namespace detail {

std::size_t prefix_ones_scalar(const std::uint8_t* bits, std::size_t nbits) {
  std::size_t count = 0;
  std::size_t full_bytes = nbits / 8;
  std::size_t i = 0;
  for (; i < full_bytes; ++i) {
    if (bits[i] == 0xFF) {
      count += 8;
    } else {
      return count + static_cast<std::size_t>(std::countr_one(bits[i]));
    }
  }
  std::size_t tail = nbits % 8;
  if (tail != 0) {
    std::size_t run = static_cast<std::size_t>(std::countr_one(bits[i]));
    count += run < tail ? run : tail;
  }
  return count;
}

// splitmix64 finalizer over key ^ (seed * golden-ratio odd constant).
static inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

void hash64_batch_scalar(const std::uint64_t* keys, std::uint64_t* out,
                         std::size_t n, std::uint64_t seed) {
  const std::uint64_t salt = seed * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = mix64(keys[i] ^ salt);
  }
}

}  // namespace detail

namespace {

struct Dispatch {
  Isa isa;
  std::size_t (*prefix_ones)(const std::uint8_t*, std::size_t);
  void (*hash64_batch)(const std::uint64_t*, std::uint64_t*, std::size_t,
                       std::uint64_t);
};

Dispatch select_dispatch() {
  const char* force = std::getenv("NAMDB_FORCE_SCALAR");
  bool scalar_only = force != nullptr && force[0] == '1';
#if defined(__x86_64__) || defined(_M_X64)
  if (!scalar_only && __builtin_cpu_supports("avx2")) {
    return {Isa::kAvx2, detail::prefix_ones_avx2, detail::hash64_batch_avx2};
  }
#else
  (void)scalar_only;
#endif
  return {Isa::kScalar, detail::prefix_ones_scalar, detail::hash64_batch_scalar};
}

const Dispatch& dispatch() {
  static const Dispatch d = select_dispatch();
  return d;
}

}  // namespace

Isa active_isa() { return dispatch().isa; }

std::size_t prefix_ones(const std::uint8_t* bits, std::size_t nbits) {
  return dispatch().prefix_ones(bits, nbits);
}

void hash64_batch(const std::uint64_t* keys, std::uint64_t* out, std::size_t n,
                  std::uint64_t seed) {
  dispatch().hash64_batch(keys, out, n, seed);
}

std::uint64_t hash64(std::uint64_t key, std::uint64_t seed) {
  std::uint64_t out;
  detail::hash64_batch_scalar(&key, &out, 1, seed);
  return out;
}

}  // namespace namdb::kernels
