#include "scalegraph/security_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "scalegraph/random.hpp"
#include "scalegraph/routing.hpp"

namespace scalegraph::security {

const char* to_string(FaultModel model) noexcept {
  return model == FaultModel::one_half ? "1/2" : "1/3";
}

std::optional<FaultModel> parse_fault_model(std::string_view text) {
  if (text == "1/2" || text == "half") return FaultModel::one_half;
  if (text == "1/3" || text == "third") return FaultModel::one_third;
  return std::nullopt;
}

std::size_t compromise_threshold(std::size_t r, FaultModel model) {
  if (r == 0) throw std::invalid_argument("shard size must be positive");
  if (model == FaultModel::one_half) return (r + 1) / 2;
  return (r - 1) / 3 + 1;
}

bool is_compromised(std::size_t byzantine_members, std::size_t r, FaultModel model) {
  return byzantine_members >= compromise_threshold(r, model);
}

bool is_compromised(std::span<const Identifier> shard, const std::unordered_set<Identifier>& byzantine,
                    FaultModel model) {
  const auto k = static_cast<std::size_t>(
      std::count_if(shard.begin(), shard.end(), [&](const Identifier& id) { return byzantine.contains(id); }));
  return is_compromised(k, shard.size(), model);
}

std::size_t byzantine_count(double F, std::size_t N) {
  if (!(F >= 0.0 && F <= 1.0)) throw std::invalid_argument("Byzantine fraction must lie in [0, 1]");
  return static_cast<std::size_t>(std::floor(F * static_cast<double>(N) + 1e-9));
}

ShardNetwork ShardNetwork::sample(std::mt19937_64& rng, std::size_t N, std::size_t m, std::size_t r,
                                  unsigned id_bits) {
  if (r == 0 || r > N) throw std::invalid_argument("shard size must lie in [1, N]");
  const IdSpace space(id_bits);
  routing::ClosestIndex index(random_distinct_identifiers(rng, space, N), space);

  ShardNetwork net;
  net.nodes = index.sorted();
  net.masks.node_count = N;
  net.accounts.reserve(m);
  net.shard_ranks.reserve(m);
  for (std::size_t s = 0; s < m; ++s) {
    net.accounts.push_back(random_identifier(rng, space));
    net.shard_ranks.push_back(index.closest_ranks(net.accounts.back(), r));
    net.masks.add_shard(net.shard_ranks.back());
  }
  return net;
}

std::vector<std::vector<Identifier>> build_shards(std::uint64_t seed, std::size_t N, std::size_t m,
                                                  std::size_t r, unsigned id_bits) {
  std::mt19937_64 rng(seed);
  const ShardNetwork net = ShardNetwork::sample(rng, N, m, r, id_bits);
  std::vector<std::vector<Identifier>> shards;
  shards.reserve(m);
  for (const auto& ranks : net.shard_ranks) {
    auto& shard = shards.emplace_back();
    for (std::size_t rank : ranks) shard.push_back(net.nodes[rank]);
  }
  return shards;
}

IterationStats run_iterations(const ShardNetwork& network, std::size_t b, FaultModel model,
                              std::uint64_t iterations, std::mt19937_64& rng, const Kernel& kernel,
                              bool stop_at_first) {
  const std::size_t N = network.masks.node_count;
  if (b > N) throw std::invalid_argument("more Byzantine nodes than nodes");
  IterationStats stats;
  if (network.masks.shard_count() == 0 || network.shard_ranks.empty()) {
    stats.iterations = iterations;
    return stats;
  }
  const auto threshold = static_cast<std::uint32_t>(compromise_threshold(network.shard_ranks.front().size(), model));

  std::vector<std::uint64_t> byzantine(network.masks.bitset_words(), 0);
  std::vector<std::uint32_t> order(N);
  std::iota(order.begin(), order.end(), 0u);

  for (std::uint64_t it = 0; it < iterations; ++it) {
    // Partial Fisher-Yates: the first b entries become a uniform b-subset.
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i + bounded(rng, N - i);
      std::swap(order[i], order[j]);
      byzantine[order[i] / 64] |= std::uint64_t{1} << (order[i] % 64);
    }
    const bool hit = b >= threshold &&
                     kernel.first_at_least(network.masks, byzantine.data(), threshold) < network.masks.shard_count();
    for (std::size_t i = 0; i < b; ++i) byzantine[order[i] / 64] = 0;
    ++stats.iterations;
    if (hit) {
      ++stats.compromised;
      if (stop_at_first) break;
    }
  }
  return stats;
}

void ExperimentConfig::validate() const {
  if (N == 0) throw std::invalid_argument("N must be positive");
  if (m == 0) throw std::invalid_argument("m must be positive");
  if (r == 0 || r > N) throw std::invalid_argument("r must lie in [1, N]");
  if (!(F >= 0.0 && F <= 1.0)) throw std::invalid_argument("F must lie in [0, 1]");
  if (repetitions == 0) throw std::invalid_argument("repetitions must be positive");
  if (iterations_per_rep == 0) throw std::invalid_argument("iterations must be positive");
  (void)IdSpace(id_bits);
  if (id_bits < 64 && N > (std::uint64_t{1} << id_bits)) throw std::invalid_argument("N exceeds the identifier space");
}

double ExperimentResult::failure_probability() const {
  if (total_iterations == 0) return 0.0;
  return static_cast<double>(compromised_iterations) / static_cast<double>(total_iterations);
}

double ExperimentResult::standard_error() const {
  if (total_iterations == 0) return 0.0;
  const double p = failure_probability();
  return std::sqrt(p * (1.0 - p) / static_cast<double>(total_iterations));
}

namespace {

/// Calls body(rep) for rep in [0, count) on up to workers threads.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const Kernel& kernel) {
  config.validate();
  const std::size_t b = byzantine_count(config.F, config.N);
  ExperimentResult result;
  result.per_repetition.resize(config.repetitions);
  parallel_for(config.repetitions, config.workers, [&](std::size_t rep) {
    std::mt19937_64 rng(derive_seed(config.seed, rep));
    const ShardNetwork net = ShardNetwork::sample(rng, config.N, config.m, config.r, config.id_bits);
    result.per_repetition[rep] = run_iterations(net, b, config.f_model, config.iterations_per_rep, rng, kernel);
  });
  for (const auto& rep : result.per_repetition) {
    result.compromised_iterations += rep.compromised;
    result.total_iterations += rep.iterations;
  }
  return result;
}

ShardSizeOutcome find_required_shard_size(const ShardSizeSearch& search, const Kernel& kernel) {
  ShardSizeOutcome outcome;
  const double tolerance = search.f_model == FaultModel::one_half ? 0.5 : 1.0 / 3.0;
  if (search.F >= tolerance - 1e-12) {
    outcome.reason = "Byzantine fraction reaches the per-shard tolerance";
    return outcome;
  }
  const std::size_t b = byzantine_count(search.F, search.N);
  const auto m = static_cast<std::size_t>(std::llround(search.shards_per_node * static_cast<double>(search.N)));

  for (std::size_t r = search.grid_origin; r < search.N; r += search.grid_step) {
    std::atomic<bool> compromised{false};
    std::vector<std::uint64_t> iterations(search.repetitions, 0);
    // Streams are keyed by (r, repetition) so each probe is reproducible alone.
    parallel_for(search.repetitions, search.workers, [&](std::size_t rep) {
      if (compromised) return;
      std::mt19937_64 rng(derive_seed(derive_seed(search.seed, r), rep));
      const ShardNetwork net = ShardNetwork::sample(rng, search.N, m, r, search.id_bits);
      const auto stats = run_iterations(net, b, search.f_model, search.iterations_per_rep, rng, kernel, true);
      iterations[rep] = stats.iterations;
      if (stats.compromised > 0) compromised = true;
    });
    outcome.probes.emplace_back(r, compromised.load());
    if (!compromised) {
      outcome.r = r;
      outcome.iterations = std::accumulate(iterations.begin(), iterations.end(), std::uint64_t{0});
      return outcome;
    }
  }
  outcome.reason = "no shard size below N avoids compromise";
  return outcome;
}

double hypergeometric_p(std::size_t N, std::size_t b, std::size_t r, FaultModel model) {
  if (b > N || r > N || r == 0) throw std::invalid_argument("hypergeometric_p requires b <= N and 1 <= r <= N");
  const std::size_t threshold = compromise_threshold(r, model);
  const std::size_t k_lo = std::max(threshold, r > N - b ? r - (N - b) : std::size_t{0});
  const std::size_t k_hi = std::min(r, b);
  if (k_lo > k_hi) return 0.0;

  auto log_choose = [](std::size_t n, std::size_t k) {
    return lgammal(static_cast<long double>(n) + 1) - lgammal(static_cast<long double>(k) + 1) -
           lgammal(static_cast<long double>(n - k) + 1);
  };
  const long double log_total = log_choose(N, r);
  std::vector<long double> logs;
  logs.reserve(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) logs.push_back(log_choose(b, k) + log_choose(N - b, r - k) - log_total);
  const long double peak = *std::max_element(logs.begin(), logs.end());
  long double sum = 0;
  for (long double l : logs) sum += expl(l - peak);
  const long double p = expl(peak + logl(sum));
  return static_cast<double>(std::min<long double>(p, 1.0L));
}

double failure_probability(double p, double m) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (!(m > 0.0)) throw std::invalid_argument("m must be positive");
  if (p == 1.0) return 1.0;
  return -std::expm1(m * std::log1p(-p));
}

std::vector<AnalyticRow> compare_to_analytic(const ExperimentConfig& base, std::span<const std::size_t> rs,
                                             const Kernel& kernel) {
  std::vector<AnalyticRow> rows;
  const std::size_t b = byzantine_count(base.F, base.N);
  for (std::size_t r : rs) {
    ExperimentConfig config = base;
    config.r = r;
    AnalyticRow row;
    row.r = r;
    row.observed = run_experiment(config, kernel);
    row.p = hypergeometric_p(config.N, b, r, config.f_model);
    row.analytic_m = failure_probability(row.p, static_cast<double>(config.m));
    row.analytic_N = failure_probability(row.p, static_cast<double>(config.N));
    row.analytic_N_over_r = failure_probability(row.p, static_cast<double>(config.N) / static_cast<double>(r));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", value);
  return buf;
}

std::string csv_header() { return "N,m,r,F,f,iterations,compromised,probability,stderr,seed"; }

std::string csv_row(const ExperimentConfig& config, const ExperimentResult& result) {
  std::string row;
  row += std::to_string(config.N) + ',' + std::to_string(config.m) + ',' + std::to_string(config.r) + ',';
  row += format_number(config.F) + ',' + to_string(config.f_model) + ',';
  row += std::to_string(result.total_iterations) + ',' + std::to_string(result.compromised_iterations) + ',';
  row += format_number(result.failure_probability()) + ',' + format_number(result.standard_error()) + ',';
  row += std::to_string(config.seed);
  return row;
}

}  // namespace scalegraph::security
