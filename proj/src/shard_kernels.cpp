#include "scalegraph/shard_kernels.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <stdexcept>

#include "shard_kernels_impl.hpp"

namespace scalegraph::security {

void ShardMasks::add_shard(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("empty shard");
  const auto [lo, hi] = std::minmax_element(ranks.begin(), ranks.end());
  if (*hi >= node_count) throw std::out_of_range("shard rank beyond node count");
  const std::size_t first = *lo / 64;
  std::size_t words = *hi / 64 - first + 1;
  words = (words + kBlockWords - 1) / kBlockWords * kBlockWords;

  word_offset.push_back(static_cast<std::uint32_t>(first));
  word_count.push_back(static_cast<std::uint32_t>(words));
  mask_start.push_back(static_cast<std::uint32_t>(masks.size()));
  const std::size_t base = masks.size();
  masks.resize(base + words, 0);
  for (std::size_t rank : ranks) {
    const std::size_t bit = rank - first * 64;
    masks[base + bit / 64] |= std::uint64_t{1} << (bit % 64);
  }
}

const char* to_string(KernelIsa isa) noexcept {
  switch (isa) {
    case KernelIsa::scalar: return "scalar";
    case KernelIsa::avx2: return "avx2";
    case KernelIsa::avx512: return "avx512";
    case KernelIsa::neon: return "neon";
  }
  return "unknown";
}

std::optional<KernelIsa> parse_kernel_isa(std::string_view name) {
  for (KernelIsa isa : {KernelIsa::scalar, KernelIsa::avx2, KernelIsa::avx512, KernelIsa::neon}) {
    if (name == to_string(isa)) return isa;
  }
  return std::nullopt;
}

namespace detail {

void count_scalar(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t* counts) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint64_t* mask = shards.masks.data() + shards.mask_start[s];
    const std::uint64_t* byz = byzantine + shards.word_offset[s];
    std::uint32_t total = 0;
    for (std::uint32_t w = 0; w < shards.word_count[s]; ++w) total += std::popcount(mask[w] & byz[w]);
    counts[s] = total;
  }
}

std::size_t first_scalar(const ShardMasks& shards, const std::uint64_t* byzantine, std::uint32_t threshold) {
  const std::size_t n = shards.shard_count();
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint64_t* mask = shards.masks.data() + shards.mask_start[s];
    const std::uint64_t* byz = byzantine + shards.word_offset[s];
    std::uint32_t total = 0;
    for (std::uint32_t w = 0; w < shards.word_count[s]; ++w) total += std::popcount(mask[w] & byz[w]);
    if (total >= threshold) return s;
  }
  return n;
}

}  // namespace detail

namespace {

bool cpu_has(KernelIsa isa) {
  switch (isa) {
    case KernelIsa::scalar: return true;
#if defined(SCALEGRAPH_HAVE_AVX2)
    case KernelIsa::avx2: return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#endif
#if defined(SCALEGRAPH_HAVE_AVX512)
    case KernelIsa::avx512:
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512vpopcntdq");
#endif
#if defined(__aarch64__)
    case KernelIsa::neon: return true;
#endif
    default: return false;
  }
}

}  // namespace

std::vector<KernelIsa> available_kernels() {
  std::vector<KernelIsa> out;
  for (KernelIsa isa : {KernelIsa::scalar, KernelIsa::avx2, KernelIsa::avx512, KernelIsa::neon}) {
    if (cpu_has(isa)) out.push_back(isa);
  }
  return out;
}

std::optional<Kernel> kernel_for(KernelIsa isa) {
  if (!cpu_has(isa)) return std::nullopt;
  switch (isa) {
    case KernelIsa::scalar: return Kernel{isa, detail::count_scalar, detail::first_scalar};
#if defined(SCALEGRAPH_HAVE_AVX2)
    case KernelIsa::avx2: return Kernel{isa, detail::count_avx2, detail::first_avx2};
#endif
#if defined(SCALEGRAPH_HAVE_AVX512)
    case KernelIsa::avx512: return Kernel{isa, detail::count_avx512, detail::first_avx512};
#endif
#if defined(__aarch64__)
    case KernelIsa::neon: return Kernel{isa, detail::count_neon, detail::first_neon};
#endif
    default: return std::nullopt;
  }
}

const Kernel& default_kernel() {
  static const Kernel chosen = [] {
    if (const char* forced = std::getenv("SCALEGRAPH_KERNEL")) {
      if (auto isa = parse_kernel_isa(forced)) {
        if (auto k = kernel_for(*isa)) return *k;
      }
    }
    return *kernel_for(available_kernels().back());
  }();
  return chosen;
}

}  // namespace scalegraph::security
