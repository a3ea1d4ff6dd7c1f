#if defined(__aarch64__)

#include <arm_neon.h>

#include "shard_kernels_impl.hpp"

namespace scalegraph::security::detail {

namespace {

inline std::uint32_t shard_count(const ShardMasks& shards, const std::uint64_t* byzantine, std::size_t s) {
  const std::uint64_t* mask = shards.masks.data() + shards.mask_start[s];
  const std::uint64_t* byz = byzantine + shards.word_offset[s];
  std::uint32_t total = 0;
  for (std::uint32_t w = 0; w < shards.word_count[s]; w += 2) {
    const uint64x2_t v = vandq_u64(vld1q_u64(mask + w), vld1q_u64(byz + w));
    total += vaddvq_u8(vcntq_u8(vreinterpretq_u8_u64(v)));
  }
  return total;
}

}  // namespace

void count_neon(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) counts[s] = shard_count(shards, byzantine, s);
}

std::size_t first_neon(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) {
    if (shard_count(shards, byzantine, s) >= threshold) return s;
  }
  return n;
}

}  // namespace scalegraph::security::detail

#endif
