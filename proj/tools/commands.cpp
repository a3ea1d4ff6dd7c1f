#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scalegraph::cli {

using nlohmann::json;

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SCALEGRAPH_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw std::invalid_argument(std::string("SCALEGRAPH_SEED is not an unsigned integer: ") + env);
  }
  return fallback;
}

std::string run_shard_size(const ShardSizeParams& p) {
  std::string csv = "N,F,f,r,status,probes,iterations,seed\n";
  for (std::size_t N : p.nodes) {
    security::ShardSizeSearch search;
    search.N = N;
    search.F = p.F;
    search.f_model = p.f_model;
    search.seed = p.seed;
    search.repetitions = p.repetitions;
    search.iterations_per_rep = p.iterations;
    search.shards_per_node = p.shards_per_node;
    search.grid_origin = p.grid_origin;
    search.grid_step = p.grid_step;
    search.id_bits = p.id_bits;
    search.workers = p.workers;
    std::string row = std::to_string(N) + ',' + security::format_number(p.F) + ',' + security::to_string(p.f_model);
    try {
      const auto outcome = security::find_required_shard_size(search);
      row += ',' + (outcome.r ? std::to_string(*outcome.r) : std::string());
      row += ',' + (outcome.r ? std::string("ok") : "infeasible: " + outcome.reason);
      row += ',' + std::to_string(outcome.probes.size()) + ',' + std::to_string(outcome.iterations);
    } catch (const std::invalid_argument& e) {
      row += ",,invalid: " + std::string(e.what()) + ",0,0";
    }
    row += ',' + std::to_string(p.seed) + '\n';
    csv += row;
  }
  return csv;
}

std::string run_failure_prob(const FailureProbParams& p) {
  std::string csv = security::csv_header() + ",p_shard,analytic,analytic_N_over_r\n";
  const std::size_t b = security::byzantine_count(p.F, p.N);
  for (std::size_t r : p.shard_sizes) {
    for (std::size_t m : p.shard_counts) {
      security::ExperimentConfig config;
      config.N = p.N;
      config.m = m;
      config.r = r;
      config.F = p.F;
      config.f_model = p.f_model;
      config.repetitions = p.repetitions;
      config.iterations_per_rep = p.iterations;
      config.seed = p.seed;
      config.id_bits = p.id_bits;
      config.workers = p.workers;
      config.validate();
      const auto result = security::run_experiment(config);
      const double shard_p = security::hypergeometric_p(p.N, b, r, p.f_model);
      csv += security::csv_row(config, result) + ',' + security::format_number(shard_p) + ',' +
             security::format_number(security::failure_probability(shard_p, static_cast<double>(m))) + ',' +
             security::format_number(security::failure_probability(
                 shard_p, static_cast<double>(p.N) / static_cast<double>(r))) +
             '\n';
    }
  }
  return csv;
}

ProtocolRun run_protocol(const json& scenario_doc) {
  ProtocolRun run;
  const simnet::Scenario scenario = simnet::parse_scenario(scenario_doc);
  std::ostringstream trace;
  simnet::Simulator sim(scenario, &trace);
  run.result = sim.run();
  run.trace = trace.str();
  run.assertions = simnet::evaluate_assertions(scenario, run.result);
  for (const auto& a : run.assertions) run.passed = run.passed && a.pass;
  return run;
}

json to_json(const ShardSizeParams& p) {
  return json{{"nodes", p.nodes},
              {"F", p.F},
              {"f", security::to_string(p.f_model)},
              {"repetitions", p.repetitions},
              {"iterations", p.iterations},
              {"shards_per_node", p.shards_per_node},
              {"grid_origin", p.grid_origin},
              {"grid_step", p.grid_step},
              {"id_bits", p.id_bits},
              {"seed", p.seed},
              {"workers", p.workers}};
}

json to_json(const FailureProbParams& p) {
  return json{{"N", p.N},
              {"shard_counts", p.shard_counts},
              {"shard_sizes", p.shard_sizes},
              {"F", p.F},
              {"f", security::to_string(p.f_model)},
              {"repetitions", p.repetitions},
              {"iterations", p.iterations},
              {"id_bits", p.id_bits},
              {"seed", p.seed},
              {"workers", p.workers}};
}

namespace {

security::FaultModel fault_model_from(const json& j) {
  auto model = security::parse_fault_model(j.get<std::string>());
  if (!model) throw std::invalid_argument("bad fault model in manifest");
  return *model;
}

}  // namespace

ShardSizeParams shard_size_from_json(const json& j) {
  ShardSizeParams p;
  p.nodes = j.at("nodes").get<std::vector<std::size_t>>();
  p.F = j.at("F").get<double>();
  p.f_model = fault_model_from(j.at("f"));
  p.repetitions = j.at("repetitions").get<std::size_t>();
  p.iterations = j.at("iterations").get<std::uint64_t>();
  p.shards_per_node = j.at("shards_per_node").get<double>();
  p.grid_origin = j.at("grid_origin").get<std::size_t>();
  p.grid_step = j.at("grid_step").get<std::size_t>();
  p.id_bits = j.at("id_bits").get<unsigned>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.workers = j.value("workers", 1u);
  return p;
}

FailureProbParams failure_prob_from_json(const json& j) {
  FailureProbParams p;
  p.N = j.at("N").get<std::size_t>();
  p.shard_counts = j.at("shard_counts").get<std::vector<std::size_t>>();
  p.shard_sizes = j.at("shard_sizes").get<std::vector<std::size_t>>();
  p.F = j.at("F").get<double>();
  p.f_model = fault_model_from(j.at("f"));
  p.repetitions = j.at("repetitions").get<std::size_t>();
  p.iterations = j.at("iterations").get<std::uint64_t>();
  p.id_bits = j.at("id_bits").get<unsigned>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.workers = j.value("workers", 1u);
  return p;
}

json to_json(const Manifest& m) {
  return json{{"command", m.command},          {"parameters", m.parameters}, {"seed", m.seed},
              {"version", m.version},          {"outputs", m.outputs},       {"wall_seconds", m.wall_seconds}};
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.command = j.at("command").get<std::string>();
  m.parameters = j.at("parameters");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.version = j.value("version", std::string());
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.wall_seconds = j.value("wall_seconds", 0.0);
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_file(path, to_json(m).dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& path) {
  try {
    return manifest_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string execute(const Manifest& m) {
  if (m.command == "shard-size") return run_shard_size(shard_size_from_json(m.parameters));
  if (m.command == "failure-prob") return run_failure_prob(failure_prob_from_json(m.parameters));
  if (m.command == "protocol") return run_protocol(m.parameters.at("scenario")).trace;
  throw std::invalid_argument("unknown command in manifest: " + m.command);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << bytes;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace scalegraph::cli
