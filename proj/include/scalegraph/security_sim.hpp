#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "scalegraph/ident.hpp"
#include "scalegraph/shard_kernels.hpp"

namespace scalegraph::security {

/// Per-shard fault tolerance: fewer than half, or fewer than a third, of the
/// members may be Byzantine.
enum class FaultModel { one_half, one_third };

const char* to_string(FaultModel model) noexcept;
/// Accepts "1/2", "half", "1/3", "third".
std::optional<FaultModel> parse_fault_model(std::string_view text);

/// Smallest Byzantine member count that compromises a shard of size r.
std::size_t compromise_threshold(std::size_t r, FaultModel model);
bool is_compromised(std::size_t byzantine_members, std::size_t r, FaultModel model);
bool is_compromised(std::span<const Identifier> shard, const std::unordered_set<Identifier>& byzantine,
                    FaultModel model);

/// b = floor(F * N), tolerant of F values like 1/3 that are not exact in binary.
std::size_t byzantine_count(double F, std::size_t N);

inline constexpr unsigned kDefaultIdBits = 32;

/// m shards of the r nodes closest to random account IDs.
std::vector<std::vector<Identifier>> build_shards(std::uint64_t seed, std::size_t N, std::size_t m,
                                                  std::size_t r, unsigned id_bits = kDefaultIdBits);

/// One sampled network: node IDs in sorted order (a node's rank is its
/// position) and m shards as rank bitmasks.
struct ShardNetwork {
  std::vector<Identifier> nodes;
  std::vector<Identifier> accounts;
  std::vector<std::vector<std::size_t>> shard_ranks;
  ShardMasks masks;

  static ShardNetwork sample(std::mt19937_64& rng, std::size_t N, std::size_t m, std::size_t r,
                             unsigned id_bits = kDefaultIdBits);
};

struct IterationStats {
  std::uint64_t iterations = 0;
  std::uint64_t compromised = 0;
};

/// Runs iterations on a fixed network, each with a fresh uniform sample of b
/// Byzantine nodes. With stop_at_first, returns after the first compromised
/// iteration.
IterationStats run_iterations(const ShardNetwork& network, std::size_t b, FaultModel model,
                              std::uint64_t iterations, std::mt19937_64& rng, const Kernel& kernel,
                              bool stop_at_first = false);

struct ExperimentConfig {
  std::size_t N = 2000;
  std::size_t m = 4000;
  std::size_t r = 61;
  double F = 0.25;
  FaultModel f_model = FaultModel::one_half;
  std::size_t repetitions = 20;
  std::uint64_t iterations_per_rep = 5000;
  std::uint64_t seed = 1;
  unsigned id_bits = kDefaultIdBits;
  unsigned workers = 1;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

struct ExperimentResult {
  std::uint64_t compromised_iterations = 0;
  std::uint64_t total_iterations = 0;
  std::vector<IterationStats> per_repetition;

  double failure_probability() const;
  /// Binomial standard error of failure_probability().
  double standard_error() const;
  friend bool operator==(const ExperimentResult& a, const ExperimentResult& b) {
    return a.compromised_iterations == b.compromised_iterations && a.total_iterations == b.total_iterations;
  }
};

/// Repetitions run on config.workers threads; the result does not depend on
/// the worker count.
ExperimentResult run_experiment(const ExperimentConfig& config, const Kernel& kernel = default_kernel());

struct ShardSizeSearch {
  std::size_t N = 1000;
  double F = 0.2;
  FaultModel f_model = FaultModel::one_half;
  std::uint64_t seed = 1;
  std::size_t repetitions = 20;
  std::uint64_t iterations_per_rep = 5000;
  /// Shards per network as a multiple of N.
  double shards_per_node = 2.0;
  std::size_t grid_origin = 21;
  std::size_t grid_step = 20;
  unsigned id_bits = kDefaultIdBits;
  unsigned workers = 1;
};

struct ShardSizeOutcome {
  /// Required shard size, or nullopt when no grid value below N works.
  std::optional<std::size_t> r;
  std::string reason;
  /// Grid values tried, with whether a compromise was seen.
  std::vector<std::pair<std::size_t, bool>> probes;
  /// Iterations run at the accepted r.
  std::uint64_t iterations = 0;
};

/// Smallest grid r for which no iteration of any repetition sees a
/// compromised shard.
ShardSizeOutcome find_required_shard_size(const ShardSizeSearch& search, const Kernel& kernel = default_kernel());

/// Probability that a uniformly random r-subset of N nodes, b of them
/// Byzantine, is compromised under the model.
double hypergeometric_p(std::size_t N, std::size_t b, std::size_t r, FaultModel model);

/// 1 - (1 - p)^m without cancellation for tiny p; m may be fractional.
double failure_probability(double p, double m);

struct AnalyticRow {
  std::size_t r = 0;
  ExperimentResult observed;
  double p = 0;
  double analytic_m = 0;
  double analytic_N = 0;
  double analytic_N_over_r = 0;
};

/// Observed probability beside the analytic model at shard counts m, N and
/// N/r, one row per r.
std::vector<AnalyticRow> compare_to_analytic(const ExperimentConfig& base, std::span<const std::size_t> rs,
                                             const Kernel& kernel = default_kernel());

// CSV output.

std::string csv_header();
std::string csv_row(const ExperimentConfig& config, const ExperimentResult& result);
std::string format_number(double value);

}  // namespace scalegraph::security
