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

#ifndef NAMDB_KERNELS_HPP_
#define NAMDB_KERNELS_HPP_

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops used by the timestamp vector scan and the
// partitioning/filter hash paths. Each kernel has a scalar reference
// implementation and an AVX2 variant; the active one is picked once at
// startup from CPUID. Set NAMDB_FORCE_SCALAR=1 in the environment to pin
// the scalar path (the equivalence tests use this).

namespace namdb::kernels {

enum class Isa { kScalar, kAvx2 };

// ISA selected by the dispatcher for this process.
Isa active_isa();

// Length of the run of consecutive 1-bits starting at bit 0. Bits are
// numbered LSB-first within each byte, bytes in increasing address order.
// Scans at most nbits.
std::size_t prefix_ones(const std::uint8_t* bits, std::size_t nbits);

// Elementwise seeded 64-bit mixer (splitmix64 finalizer over key ^ seed').
// out may alias keys.
void hash64_batch(const std::uint64_t* keys, std::uint64_t* out,
                  std::size_t n, std::uint64_t seed);

// Single-value form of the same mixer; bit-exact with hash64_batch.
std::uint64_t hash64(std::uint64_t key, std::uint64_t seed);

namespace detail {
std::size_t prefix_ones_scalar(const std::uint8_t* bits, std::size_t nbits);
void hash64_batch_scalar(const std::uint64_t* keys, std::uint64_t* out,
                         std::size_t n, std::uint64_t seed);
#if defined(__x86_64__) || defined(_M_X64)
std::size_t prefix_ones_avx2(const std::uint8_t* bits, std::size_t nbits);
void hash64_batch_avx2(const std::uint64_t* keys, std::uint64_t* out,
                       std::size_t n, std::uint64_t seed);
#endif
}  // namespace detail

}  // namespace namdb::kernels

#endif  // NAMDB_KERNELS_HPP_
