#include <immintrin.h>

#include "shard_kernels_impl.hpp"

namespace scalegraph::security::detail {

namespace {

// Nibble-table popcount; returns per-64-bit-lane counts.
inline __m256i popcount_lanes(__m256i v) {
  const __m256i table = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                         0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  const __m256i lo = _mm256_and_si256(v, low_mask);
  const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
  const __m256i bytes = _mm256_add_epi8(_mm256_shuffle_epi8(table, lo), _mm256_shuffle_epi8(table, hi));
  return _mm256_sad_epu8(bytes, _mm256_setzero_si256());
}

inline std::uint32_t shard_count(const ShardMasks& shards, const std::uint64_t* byzantine, std::size_t s) {
  const auto* mask = reinterpret_cast<const __m256i*>(shards.masks.data() + shards.mask_start[s]);
  const auto* byz = reinterpret_cast<const __m256i*>(byzantine + shards.word_offset[s]);
  __m256i acc = _mm256_setzero_si256();
  const std::uint32_t blocks = shards.word_count[s] / ShardMasks::kBlockWords;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const __m256i v = _mm256_and_si256(_mm256_loadu_si256(mask + b), _mm256_loadu_si256(byz + b));
    acc = _mm256_add_epi64(acc, popcount_lanes(v));
  }
  const __m128i sum = _mm_add_epi64(_mm256_castsi256_si128(acc), _mm256_extracti128_si256(acc, 1));
  return static_cast<std::uint32_t>(_mm_cvtsi128_si64(sum) + _mm_extract_epi64(sum, 1));
}

}  // namespace

void count_avx2(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) counts[s] = shard_count(shards, byzantine, s);
}

std::size_t first_avx2(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) {
    if (shard_count(shards, byzantine, s) >= threshold) return s;
  }
  return n;
}

}  // namespace scalegraph::security::detail
