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

// AVX2 variants. This translation unit is compiled with -mavx2; all entry
// points are only reached after the dispatcher has confirmed CPU support.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <bit>
#include <cstdint>

#include "namdb/kernels.hpp"

namespace namdb::kernels::detail {

std::size_t prefix_ones_avx2(const std::uint8_t* bits, std::size_t nbits) {
  std::size_t full_bytes = nbits / 8;
  std::size_t i = 0;
  const __m256i ones = _mm256_set1_epi8(static_cast<char>(0xFF));
  while (i + 32 <= full_bytes) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + i));
    __m256i eq = _mm256_cmpeq_epi8(v, ones);
    auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(eq));
    if (mask != 0xFFFFFFFFu) {
      // First byte in this block that is not all-ones.
      std::size_t j = i + static_cast<std::size_t>(std::countr_one(mask));
      return j * 8 + static_cast<std::size_t>(std::countr_one(bits[j]));
    }
    i += 32;
  }
  std::size_t count = i * 8;
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

namespace {

// 64x64 -> low 64 multiply from 32-bit partial products.
inline __m256i mullo64(__m256i a, __m256i b) {
  __m256i lo = _mm256_mul_epu32(a, b);
  __m256i a_hi = _mm256_srli_epi64(a, 32);
  __m256i b_hi = _mm256_srli_epi64(b, 32);
  __m256i cross = _mm256_add_epi64(_mm256_mul_epu32(a_hi, b),
                                   _mm256_mul_epu32(a, b_hi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

}  // namespace

void hash64_batch_avx2(const std::uint64_t* keys, std::uint64_t* out,
                       std::size_t n, std::uint64_t seed) {
  const std::uint64_t salt =
      seed * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL;
  const __m256i vsalt = _mm256_set1_epi64x(static_cast<long long>(salt));
  const __m256i c1 = _mm256_set1_epi64x(static_cast<long long>(0xBF58476D1CE4E5B9ULL));
  const __m256i c2 = _mm256_set1_epi64x(static_cast<long long>(0x94D049BB133111EBULL));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(keys + i));
    x = _mm256_xor_si256(x, vsalt);
    x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 30));
    x = mullo64(x, c1);
    x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 27));
    x = mullo64(x, c2);
    x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 31));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), x);
  }
  if (i < n) {
    hash64_batch_scalar(keys + i, out + i, n - i, seed);
  }
}

}  // namespace namdb::kernels::detail

#endif  // x86_64
