#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace scalegraph::security {

/// Shards as bitmasks over node ranks. Each shard covers a run of 64-bit
/// words of the rank bitset starting at word_offset; the run length is a
/// multiple of kBlockWords so vector kernels need no scalar tail.
struct ShardMasks {
  static constexpr std::size_t kBlockWords = 4;
  /// Zero words a rank bitset must carry past ceil(N/64).
  static constexpr std::size_t kPadWords = 8;

  std::size_t node_count = 0;
  std::vector<std::uint32_t> word_offset;
  std::vector<std::uint32_t> word_count;
  std::vector<std::uint32_t> mask_start;
  std::vector<std::uint64_t> masks;

  std::size_t shard_count() const noexcept { return word_offset.size(); }
  std::size_t bitset_words() const noexcept { return (node_count + 63) / 64 + kPadWords; }

  /// Adds a shard given the ranks of its members.
  void add_shard(std::span<const std::size_t> ranks);
};

enum class KernelIsa { scalar, avx2, avx512, neon };

const char* to_string(KernelIsa isa) noexcept;
std::optional<KernelIsa> parse_kernel_isa(std::string_view name);

/// Per-shard popcount of (shard mask AND byzantine bitset) into counts.
using CountFn = void (*)(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts);
/// Index of the first shard whose count reaches threshold, or shard_count().
using FirstFn = std::size_t (*)(const ShardMasks& shards, const std::uint64_t* byzantine,
                                std::uint32_t threshold);

struct Kernel {
  KernelIsa isa = KernelIsa::scalar;
  CountFn count = nullptr;
  FirstFn first_at_least = nullptr;
};

/// Variants compiled in and supported by the running CPU, scalar first.
std::vector<KernelIsa> available_kernels();
/// The named variant, or nullopt if unavailable here.
std::optional<Kernel> kernel_for(KernelIsa isa);
/// Widest available variant, unless SCALEGRAPH_KERNEL names another.
const Kernel& default_kernel();

}  // namespace scalegraph::security
