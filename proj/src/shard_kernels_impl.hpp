#pragma once

#include "scalegraph/shard_kernels.hpp"

namespace scalegraph::security::detail {

void count_scalar(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts);
std::size_t first_scalar(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold);

#if defined(SCALEGRAPH_HAVE_AVX2)
void count_avx2(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts);
std::size_t first_avx2(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold);
#endif

#if defined(SCALEGRAPH_HAVE_AVX512)
void count_avx512(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts);
std::size_t first_avx512(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold);
#endif

#if defined(__aarch64__)
void count_neon(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts);
std::size_t first_neon(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold);
#endif

}  // namespace scalegraph::security::detail
