// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include "commands.hpp"
#include "safety_draw.hpp"
#include "scalegraph/security_sim.hpp"
#include "stable_network.hpp"

namespace {

using namespace scalegraph;
using security::FaultModel;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1fs", secs);
  std::cout << (v.pass ? "PASS" : "FAIL") << " " << number << " " << name << ": " << v.detail << " [" << timing << "]"
            << std::endl;
}

std::string fmt(double v) { return security::format_number(v); }

// 1

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

Verdict analytic_exactness() {
  // Pascal's triangle up to 30 in exact integers.
  std::vector<std::vector<BigInt>> C(31, std::vector<BigInt>(31, 0));
  for (std::size_t n = 0; n <= 30; ++n) {
    C[n][0] = 1;
    for (std::size_t k = 1; k <= n; ++k) C[n][k] = C[n - 1][k - 1] + (k <= n - 1 ? C[n - 1][k] : BigInt(0));
  }
  std::size_t cases = 0;
  double worst = 0;
  std::string where;
  for (std::size_t N = 1; N <= 30; ++N) {
    for (std::size_t b = 0; b <= N; ++b) {
      for (std::size_t r = 1; r <= N; ++r) {
        for (auto model : {FaultModel::one_half, FaultModel::one_third}) {
          BigInt hits = 0;
          for (std::size_t k = security::compromise_threshold(r, model); k <= std::min(b, r); ++k) {
            if (r - k <= N - b) hits += C[b][k] * C[N - b][r - k];
          }
          const double exact = Rational(hits, C[N][r]).convert_to<double>();
          const double got = security::hypergeometric_p(N, b, r, model);
          ++cases;
          const double rel = exact == 0 ? std::abs(got) : std::abs(got - exact) / exact;
          if (rel > worst || (exact == 0 && got != 0)) {
            worst = std::max(worst, rel);
            where = "N=" + std::to_string(N) + " b=" + std::to_string(b) + " r=" + std::to_string(r);
          }
        }
      }
    }
  }
  return {worst <= 5e-13, std::to_string(cases) + " cases, worst relative error " + fmt(worst) +
                              (where.empty() ? "" : " at " + where)};
}

// 2

Verdict desk_monte_carlo() {
  security::ExperimentConfig c;
  c.N = 6;
  c.m = 1;
  c.r = 3;
  c.F = 1.0 / 3.0;
  c.repetitions = 20;
  c.iterations_per_rep = 5000;
  c.seed = 1;

  // Exact network value: enumerate every Byzantine pair against each sampled shard.
  double exact_sum = 0;
  for (std::size_t rep = 0; rep < c.repetitions; ++rep) {
    // Same stream the experiment uses for this repetition's network.
    std::mt19937_64 rng(derive_seed(c.seed, rep));
    const auto net = security::ShardNetwork::sample(rng, c.N, 1, c.r);
    std::vector<Identifier> shard;
    for (auto rank : net.shard_ranks.front()) shard.push_back(net.nodes[rank]);
    std::size_t bad = 0, total = 0;
    for (std::size_t i = 0; i < c.N; ++i) {
      for (std::size_t j = i + 1; j < c.N; ++j) {
        ++total;
        const std::unordered_set<Identifier> byz{net.nodes[i], net.nodes[j]};
        bad += security::is_compromised(shard, byz, FaultModel::one_half);
      }
    }
    exact_sum += static_cast<double>(bad) / static_cast<double>(total);
  }
  const double exact = exact_sum / static_cast<double>(c.repetitions);
  const auto result = security::run_experiment(c);
  const double p = result.failure_probability();
  const double se = result.standard_error();
  const double z = std::abs(p - exact) / se;
  return {z <= 3, "observed " + fmt(p) + " vs exact " + fmt(exact) + " over " + std::to_string(result.total_iterations) +
                      " iterations, " + fmt(z) + " standard errors"};
}

// 3, 4

std::optional<std::size_t> required_r(std::size_t N, double F, FaultModel model, std::uint64_t iterations,
                                      std::string& reason) {
  security::ShardSizeSearch s;
  s.N = N;
  s.F = F;
  s.f_model = model;
  s.iterations_per_rep = iterations;
  const auto out = security::find_required_shard_size(s);
  if (!out.r) reason = out.reason;
  return out.r;
}

std::string show(const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : std::string("none"); }

Verdict shard_size_spot_checks() {
  std::string detail, reason;
  bool pass = true;
  for (auto [F, label, want] : {std::tuple{0.2, "F=1/5", 61}, std::tuple{0.25, "F=1/4", 101}}) {
    for (std::uint64_t iterations : {5000u, 500u}) {
      const auto r = required_r(1000, F, FaultModel::one_half, iterations, reason);
      const bool ok = r && std::abs(static_cast<long>(*r) - want) <= 20;
      pass = pass && ok;
      detail += std::string(label) + (iterations == 5000 ? " full " : " reduced ") + show(r) + " (want " +
                std::to_string(want) + "±20); ";
    }
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Verdict fault_model_ratio() {
  std::string reason;
  const auto half = required_r(2000, 0.25, FaultModel::one_half, 5000, reason);
  const auto third = required_r(2000, 0.25, FaultModel::one_third, 5000, reason);
  if (!half || !third) return {false, "search failed: " + reason};
  const double ratio = static_cast<double>(*third) / static_cast<double>(*half);
  return {ratio >= 4, "f<1/3 needs " + show(third) + ", f<1/2 needs " + show(half) + ", ratio " + fmt(ratio)};
}

// 5

Verdict failure_trend() {
  security::ExperimentConfig c;
  c.N = 2000;
  c.m = 4000;
  c.F = 0.25;
  c.repetitions = 20;
  c.iterations_per_rep = 25000;
  const std::vector<std::size_t> rs{11, 21, 31, 41, 51, 61};
  const auto rows = security::compare_to_analytic(c, rs);
  bool pass = true;
  std::string detail;
  std::optional<double> prev;
  for (const auto& row : rows) {
    const double p = row.observed.failure_probability();
    detail += "r=" + std::to_string(row.r) + " " + fmt(p) + "/" + fmt(row.analytic_N_over_r) + " ";
    if (row.observed.compromised_iterations <= 100) continue;
    if (prev && !(p < *prev)) pass = false;
    prev = p;
    const double ratio = p > row.analytic_N_over_r ? p / row.analytic_N_over_r : row.analytic_N_over_r / p;
    if (!(ratio <= 10)) pass = false;
  }
  detail.pop_back();
  return {pass, "observed/analytic(m=N/r): " + detail};
}

// 6

Verdict shard_count_band() {
  security::ExperimentConfig c;
  c.N = 4000;
  c.r = 61;
  c.F = 0.25;
  c.repetitions = 20;
  c.iterations_per_rep = 25000;
  double lo = 1, hi = 0;
  bool in_band = true;
  std::string detail;
  for (std::size_t m : {1000u, 4000u, 16000u}) {
    c.m = m;
    const double p = security::run_experiment(c).failure_probability();
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    in_band = in_band && p >= 0.002 && p <= 0.006;
    detail += "m=" + std::to_string(m) + " " + fmt(p) + ", ";
  }
  const double ratio = lo > 0 ? hi / lo : INFINITY;
  return {in_band && ratio <= 2, detail + "max/min " + fmt(ratio)};
}

// 7

Verdict safety_suite() {
  std::size_t runs = 0, faulty = 0, conflicts = 0, overdrafts = 0, committed = 0, txs = 0;
  for (std::size_t r : {3u, 5u, 7u}) {
    for (std::uint64_t seed = 1; seed <= 80; ++seed) {
      const auto drawn = testing::draw_adversarial(seed, r);
      const auto result = simnet::Simulator(drawn.scenario).run();
      ++runs;
      faulty += drawn.byzantine;
      conflicts += result.safety.conflicts.size();
      overdrafts += result.safety.overdrafts.size();
      for (const auto& tx : result.txs) committed += tx.committed();
      txs += result.txs.size();
    }
  }
  return {runs >= 200 && conflicts == 0 && overdrafts == 0,
          std::to_string(runs) + " scenarios, " + std::to_string(faulty) + " faulty nodes, " + std::to_string(committed) +
              "/" + std::to_string(txs) + " transactions committed, " + std::to_string(conflicts) + " conflicts, " +
              std::to_string(overdrafts) + " overdrafts"};
}

// 8, 9

struct ScenarioCheck {
  bool pass = true;
  std::string detail;
  simnet::RunResult result;
  std::string trace;
};

ScenarioCheck run_file(const std::string& name) {
  const auto scenario = simnet::load_scenario(fs::path(SCALEGRAPH_SCENARIO_DIR) / name);
  std::ostringstream trace;
  simnet::Simulator sim(scenario, &trace);
  ScenarioCheck out;
  out.result = sim.run();
  out.trace = trace.str();
  for (const auto& a : simnet::evaluate_assertions(scenario, out.result)) {
    if (!a.pass) {
      out.pass = false;
      out.detail += " " + a.name + " failed (" + a.detail + ")";
    }
  }
  return out;
}

Verdict vote_counting_defense() {
  const auto per_group = run_file("overdraft_per_group.json");
  const auto naive = run_file("overdraft_naive.json");
  const bool blocked = !per_group.result.txs.at(0).committed();
  const bool slipped = naive.result.txs.at(0).committed();
  return {per_group.pass && naive.pass && blocked && slipped,
          std::string("per-group counting ") + (blocked ? "rejects" : "commits") + " the overdraft, naive counting " +
              (slipped ? "commits" : "rejects") + " it" + per_group.detail + naive.detail};
}

Verdict liveness_and_deadlock() {
  bool pass = true;
  std::string detail;
  for (const char* name : {"three_cycle.json", "three_cycle_optimistic.json", "crash_leader.json"}) {
    const auto a = run_file(name);
    const auto b = run_file(name);
    std::size_t committed = 0;
    for (const auto& tx : a.result.txs) committed += tx.committed();
    const bool same = a.trace == b.trace;
    pass = pass && a.pass && same && committed == a.result.txs.size();
    detail += std::string(name) + " " + std::to_string(committed) + "/" + std::to_string(a.result.txs.size()) +
              " committed" + (same ? "" : ", trace differs between runs") + a.detail + "; ";
  }
  const auto crash = run_file("crash_leader.json");
  const auto view = crash.result.max_view.at("alice");
  pass = pass && view == 1;
  return {pass, detail + "crashed sender leader cost " + std::to_string(view) + " view change(s)"};
}

// 10

Verdict lookup_correctness() {
  const double bound = 4 * std::log2(1000.0) + 4;
  std::size_t lookups = 0, mismatches = 0, worst_rounds = 0;
  for (std::uint64_t net_seed = 1; net_seed <= 100; ++net_seed) {
    const testing::StableNetwork net(net_seed, 1000);
    std::mt19937_64 rng(derive_seed(net_seed, 7));
    for (int i = 0; i < 5; ++i) {
      const auto target = random_identifier(rng, net.space);
      const auto& start = net.nodes[bounded(rng, net.nodes.size())];
      const auto result = routing::iterative_find_nodes(net.endpoint(), net.table(start), target, 20);
      const auto want = routing::oracle_closest(net.nodes, target, 20);
      ++lookups;
      mismatches += std::set<Identifier>(result.nodes.begin(), result.nodes.end()) !=
                    std::set<Identifier>(want.begin(), want.end());
      worst_rounds = std::max(worst_rounds, result.rounds);
    }
  }
  return {mismatches == 0 && static_cast<double>(worst_rounds) <= bound,
          std::to_string(lookups) + " lookups on 100 networks, " + std::to_string(mismatches) +
              " mismatches, at most " + std::to_string(worst_rounds) + " rounds (bound " + fmt(bound) + ")"};
}

// 11

int run_tool(const std::string& args) {
  const std::string cmd = std::string("\"") + SCALEGRAPH_TOOL + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict rerun_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("scalegraph_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"shard-size", "shard-size -N 1000 -F 1/5 --iterations 500 --workers 2 --out " + (dir / "ss.csv").string()},
      {"failure-prob", "failure-prob -N 2000 -m 4000 -r 21,41,61 --iterations 1000 --workers 2 --out " +
                           (dir / "fp.csv").string()},
      {"protocol", "protocol --scenario " + (fs::path(SCALEGRAPH_SCENARIO_DIR) / "crash_leader.json").string() +
                       " --out " + (dir / "trace.jsonl").string()}};
  const std::vector<std::string> outputs{"ss.csv", "fp.csv", "trace.jsonl"};
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto out = dir / outputs[i];
    const int first = run_tool(runs[i].second);
    const auto again = dir / ("again_" + outputs[i]);
    const int rerun = first == 0 ? run_tool("rerun --manifest " + cli::manifest_path_for(out).string() + " --out " +
                                            again.string())
                                 : -1;
    const bool same = rerun == 0 && cli::read_file(out) == cli::read_file(again);
    pass = pass && same;
    detail += runs[i].first + (same ? " identical" : " DIFFERS") + (i + 1 < runs.size() ? ", " : "");
  }
  fs::remove_all(dir);
  return {pass, detail};
}

}  // namespace

int main() {
  std::cout << "kernel " << security::to_string(security::default_kernel().isa) << std::endl;
  report(1, "analytic oracle exactness", analytic_exactness);
  report(2, "Monte Carlo vs exact oracle", desk_monte_carlo);
  report(3, "required shard size, N=1000", shard_size_spot_checks);
  report(4, "fault model ratio, N=2000 F=1/4", fault_model_ratio);
  report(5, "failure probability trend over r", failure_trend);
  report(6, "failure probability band over m", shard_count_band);
  report(7, "consensus safety suite", safety_suite);
  report(8, "vote counting defense", vote_counting_defense);
  report(9, "liveness and deadlock", liveness_and_deadlock);
  report(10, "lookup correctness", lookup_correctness);
  report(11, "rerun determinism", rerun_determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
