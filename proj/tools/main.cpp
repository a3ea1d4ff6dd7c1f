#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace scalegraph;
using nlohmann::json;

constexpr int kAssertionFailure = 1;
constexpr int kUsageError = 2;

double parse_fraction(const std::string& text) {
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const double num = std::stod(text.substr(0, slash));
    const double den = std::stod(text.substr(slash + 1));
    if (den == 0) throw CLI::ValidationError("fraction", "zero denominator in " + text);
    return num / den;
  }
  return std::stod(text);
}

/// "a,b,c" or "first:last:step".
std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string::npos) {
    std::size_t first = 0, last = 0, step = 0;
    if (std::sscanf(text.c_str(), "%zu:%zu:%zu", &first, &last, &step) != 3 || step == 0 || last < first) {
      throw CLI::ValidationError("list", "expected first:last:step, got " + text);
    }
    for (std::size_t v = first; v <= last; v += step) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

security::FaultModel parse_model(const std::string& text) {
  auto model = security::parse_fault_model(text);
  if (!model) throw CLI::ValidationError("--fault-model", "expected 1/2 or 1/3, got " + text);
  return *model;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::string kernel;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_out) {
  cmd->add_option("--seed", c.seed, "Random seed (falls back to SCALEGRAPH_SEED, then 1)");
  c.out = default_out;
  cmd->add_option("--out", c.out, "Output file")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Worker threads")->capture_default_str();
  cmd->add_option("--kernel", c.kernel, "Popcount kernel: scalar, avx2, avx512, neon");
}

void apply_kernel(const Common& c) {
  if (!c.kernel.empty()) ::setenv("SCALEGRAPH_KERNEL", c.kernel.c_str(), 1);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

cli::Manifest make_manifest(std::string command, json parameters, std::uint64_t seed) {
  cli::Manifest m;
  m.command = std::move(command);
  m.parameters = std::move(parameters);
  m.seed = seed;
  return m;
}

void finish(cli::Manifest manifest, const std::string& out, const std::string& bytes,
            std::chrono::steady_clock::time_point start) {
  cli::write_file(out, bytes);
  manifest.outputs = {out};
  manifest.wall_seconds = seconds_since(start);
  const auto path = cli::manifest_path_for(out);
  cli::write_manifest(manifest, path);
  std::cerr << "wrote " << out << " and " << path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ScaleGraph sharded ledger: security experiments and protocol simulation"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1);

  // shard-size
  Common ss_common;
  std::string ss_nodes = "1000", ss_F = "1/5", ss_f = "1/2";
  cli::ShardSizeParams ss;
  auto* ss_cmd = app.add_subcommand("shard-size", "Smallest shard size with no compromised shard, per network size");
  add_common(ss_cmd, ss_common, "shard_size.csv");
  ss_cmd->add_option("-N,--nodes", ss_nodes, "Network sizes, a,b,c or first:last:step")->capture_default_str();
  ss_cmd->add_option("-F,--byzantine", ss_F, "Byzantine fraction, decimal or p/q")->capture_default_str();
  ss_cmd->add_option("-f,--fault-model", ss_f, "Per-shard tolerance: 1/2 or 1/3")->capture_default_str();
  ss_cmd->add_option("--repetitions", ss.repetitions, "Networks sampled per probe")->capture_default_str();
  ss_cmd->add_option("--iterations", ss.iterations, "Byzantine samples per network")->capture_default_str();
  ss_cmd->add_option("--shards-per-node", ss.shards_per_node, "Shard count as a multiple of N")
      ->capture_default_str();
  ss_cmd->add_option("--grid-origin", ss.grid_origin, "Smallest shard size tried")->capture_default_str();
  ss_cmd->add_option("--grid-step", ss.grid_step, "Shard size increment")->capture_default_str();
  ss_cmd->add_option("--id-bits", ss.id_bits, "Identifier width")->capture_default_str();

  // failure-prob
  Common fp_common;
  std::string fp_m = "4000", fp_r = "61", fp_F = "1/4", fp_f = "1/2";
  cli::FailureProbParams fp;
  auto* fp_cmd = app.add_subcommand("failure-prob", "Observed and analytic failure probability over a sweep");
  add_common(fp_cmd, fp_common, "failure_prob.csv");
  fp_cmd->add_option("-N,--nodes", fp.N, "Network size")->capture_default_str();
  fp_cmd->add_option("-m,--shards", fp_m, "Shard counts, a,b,c or first:last:step")->capture_default_str();
  fp_cmd->add_option("-r,--shard-size", fp_r, "Shard sizes, a,b,c or first:last:step")->capture_default_str();
  fp_cmd->add_option("-F,--byzantine", fp_F, "Byzantine fraction, decimal or p/q")->capture_default_str();
  fp_cmd->add_option("-f,--fault-model", fp_f, "Per-shard tolerance: 1/2 or 1/3")->capture_default_str();
  fp_cmd->add_option("--repetitions", fp.repetitions, "Networks sampled per point")->capture_default_str();
  fp_cmd->add_option("--iterations", fp.iterations, "Byzantine samples per network")->capture_default_str();
  fp_cmd->add_option("--id-bits", fp.id_bits, "Identifier width")->capture_default_str();

  // protocol
  Common pr_common;
  std::string scenario_path;
  auto* pr_cmd = app.add_subcommand("protocol", "Run a consensus scenario and check its assertions");
  add_common(pr_cmd, pr_common, "trace.jsonl");
  pr_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);

  // rerun
  std::string manifest_path, rerun_out;
  auto* rr_cmd = app.add_subcommand("rerun", "Repeat a run from its manifest and compare the output");
  rr_cmd->add_option("--manifest", manifest_path, "Manifest written by an earlier run")
      ->required()
      ->check(CLI::ExistingFile);
  rr_cmd->add_option("--out", rerun_out, "Where to write the new output (default: overwrite the original)");

  CLI11_PARSE(app, argc, argv);
  const auto start = std::chrono::steady_clock::now();

  try {
    if (*ss_cmd) {
      apply_kernel(ss_common);
      ss.nodes = parse_list(ss_nodes);
      ss.F = parse_fraction(ss_F);
      ss.f_model = parse_model(ss_f);
      ss.seed = cli::resolve_seed(ss_common.seed);
      ss.workers = ss_common.workers;
      const std::string csv = cli::run_shard_size(ss);
      std::cout << csv;
      finish(make_manifest("shard-size", cli::to_json(ss), ss.seed), ss_common.out, csv, start);
      return 0;
    }
    if (*fp_cmd) {
      apply_kernel(fp_common);
      fp.shard_counts = parse_list(fp_m);
      fp.shard_sizes = parse_list(fp_r);
      fp.F = parse_fraction(fp_F);
      fp.f_model = parse_model(fp_f);
      fp.seed = cli::resolve_seed(fp_common.seed);
      fp.workers = fp_common.workers;
      const std::string csv = cli::run_failure_prob(fp);
      std::cout << csv;
      finish(make_manifest("failure-prob", cli::to_json(fp), fp.seed), fp_common.out, csv, start);
      return 0;
    }
    if (*pr_cmd) {
      // Validate first so syntax errors carry line numbers.
      simnet::load_scenario(scenario_path);
      json doc = json::parse(cli::read_file(scenario_path));
      if (pr_common.seed || !doc.contains("seed")) doc["seed"] = cli::resolve_seed(pr_common.seed);
      const auto run = cli::run_protocol(doc);
      for (const auto& a : run.assertions) {
        std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
      }
      std::cout << "events " << run.result.events << ", messages " << run.result.messages << ", end time "
                << run.result.end_time << (run.result.horizon_exceeded ? ", horizon exceeded" : "") << "\n";
      finish(make_manifest("protocol", json{{"scenario", doc}}, doc["seed"].get<std::uint64_t>()), pr_common.out, run.trace,
             start);
      return run.passed ? 0 : kAssertionFailure;
    }
    if (*rr_cmd) {
      const auto manifest = cli::read_manifest(manifest_path);
      if (manifest.outputs.empty()) throw std::runtime_error("manifest lists no output");
      const std::string original_path = manifest.outputs.front();
      const std::string target = rerun_out.empty() ? original_path : rerun_out;
      std::optional<std::string> original;
      if (std::filesystem::exists(original_path)) original = cli::read_file(original_path);
      const std::string bytes = cli::execute(manifest);
      cli::write_file(target, bytes);
      if (!original) {
        std::cout << "wrote " << target << " (original output not found, nothing to compare)\n";
        return 0;
      }
      const bool same = *original == bytes;
      std::cout << (same ? "identical to " : "DIFFERS from ") << original_path << "\n";
      return same ? 0 : kAssertionFailure;
    }
  } catch (const simnet::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
