#include <immintrin.h>

#include "shard_kernels_impl.hpp"

namespace scalegraph::security::detail {

namespace {

inline std::uint32_t shard_count(const ShardMasks& shards, const std::uint64_t* byzantine, std::size_t s) {
  const std::uint64_t* mask = shards.masks.data() + shards.mask_start[s];
  const std::uint64_t* byz = byzantine + shards.word_offset[s];
  const std::uint32_t words = shards.word_count[s];
  __m512i acc = _mm512_setzero_si512();
  std::uint32_t w = 0;
  for (; w + 8 <= words; w += 8) {
    const __m512i v = _mm512_and_si512(_mm512_loadu_si512(mask + w), _mm512_loadu_si512(byz + w));
    acc = _mm512_add_epi64(acc, _mm512_popcnt_epi64(v));
  }
  if (w < words) {
    // Word counts are multiples of four, so at most one half-block remains.
    const __mmask8 half = 0x0f;
    const __m512i v = _mm512_and_si512(_mm512_maskz_loadu_epi64(half, mask + w),
                                       _mm512_maskz_loadu_epi64(half, byz + w));
    acc = _mm512_add_epi64(acc, _mm512_popcnt_epi64(v));
  }
  return static_cast<std::uint32_t>(_mm512_reduce_add_epi64(acc));
}

}  // namespace

void count_avx512(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) counts[s] = shard_count(shards, byzantine, s);
}

std::size_t first_avx512(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) {
    if (shard_count(shards, byzantine, s) >= threshold) return s;
  }
  return n;
}

}  // namespace scalegraph::security::detail
