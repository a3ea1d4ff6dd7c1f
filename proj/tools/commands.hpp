#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scalegraph/security_sim.hpp"
#include "scalegraph/simnet.hpp"

namespace scalegraph::cli {

inline constexpr const char* kToolVersion = "scalegraph 0.1.0";

/// --seed, else SCALEGRAPH_SEED, else fallback.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback = 1);

struct ShardSizeParams {
  std::vector<std::size_t> nodes{1000};
  double F = 0.2;
  security::FaultModel f_model = security::FaultModel::one_half;
  std::size_t repetitions = 20;
  std::uint64_t iterations = 5000;
  double shards_per_node = 2.0;
  std::size_t grid_origin = 21;
  std::size_t grid_step = 20;
  unsigned id_bits = security::kDefaultIdBits;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct FailureProbParams {
  std::size_t N = 2000;
  std::vector<std::size_t> shard_counts{4000};
  std::vector<std::size_t> shard_sizes{61};
  double F = 0.25;
  security::FaultModel f_model = security::FaultModel::one_half;
  std::size_t repetitions = 20;
  std::uint64_t iterations = 5000;
  unsigned id_bits = security::kDefaultIdBits;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// One CSV row per N, in the order given.
std::string run_shard_size(const ShardSizeParams& params);
/// One CSV row per (r, m) pair, r-major, with observed and analytic columns.
std::string run_failure_prob(const FailureProbParams& params);

struct ProtocolRun {
  std::string trace;
  simnet::RunResult result;
  std::vector<simnet::AssertionResult> assertions;
  bool passed = true;
};

/// The scenario document is kept verbatim so a manifest can carry it.
ProtocolRun run_protocol(const nlohmann::json& scenario);

nlohmann::json to_json(const ShardSizeParams& p);
nlohmann::json to_json(const FailureProbParams& p);
ShardSizeParams shard_size_from_json(const nlohmann::json& j);
FailureProbParams failure_prob_from_json(const nlohmann::json& j);

struct Manifest {
  std::string command;
  nlohmann::json parameters;
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::vector<std::string> outputs;
  double wall_seconds = 0;
};

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
/// Path of the manifest written beside an output file.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);
void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Re-executes a manifest's command. Returns the primary output bytes.
std::string execute(const Manifest& m);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace scalegraph::cli
