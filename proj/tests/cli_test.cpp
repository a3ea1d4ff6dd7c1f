#include <cstdlib>
#include <filesystem>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "commands.hpp"

namespace scalegraph::cli {
namespace {

namespace fs = std::filesystem;

class TempDir {
public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("scalegraph_cli_" + std::to_string(::getpid()) + "_" + std::to_string(++serial_));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
  static inline int serial_ = 0;
};

int run_tool(const std::string& args) {
  const std::string cmd = std::string("\"") + SCALEGRAPH_TOOL + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Seed, FlagThenEnvironmentThenFallback) {
  ::unsetenv("SCALEGRAPH_SEED");
  EXPECT_EQ(resolve_seed(std::nullopt, 4), 4u);
  ::setenv("SCALEGRAPH_SEED", "17", 1);
  EXPECT_EQ(resolve_seed(std::nullopt), 17u);
  EXPECT_EQ(resolve_seed(3), 3u);
  ::setenv("SCALEGRAPH_SEED", "seventeen", 1);
  EXPECT_THROW(resolve_seed(std::nullopt), std::invalid_argument);
  ::unsetenv("SCALEGRAPH_SEED");
}

TEST(Manifest, JsonRoundTrip) {
  ShardSizeParams p;
  p.nodes = {100, 200};
  p.F = 0.1;
  p.iterations = 77;
  Manifest m;
  m.command = "shard-size";
  m.parameters = to_json(p);
  m.seed = 5;
  m.outputs = {"x.csv"};
  m.wall_seconds = 1.5;
  const auto back = manifest_from_json(to_json(m));
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.parameters, m.parameters);
  EXPECT_EQ(back.seed, 5u);
  EXPECT_EQ(back.version, kToolVersion);
  EXPECT_EQ(back.outputs, m.outputs);
  const auto q = shard_size_from_json(back.parameters);
  EXPECT_EQ(q.nodes, p.nodes);
  EXPECT_EQ(q.iterations, 77u);
  EXPECT_EQ(manifest_path_for("out/a.csv"), fs::path("out/a.csv.manifest.json"));
}

TEST(ShardSizeCommand, InfeasibleConfigurationGetsARow) {
  ShardSizeParams p;
  p.nodes = {90};
  p.F = 1.0 / 3.0;
  p.f_model = security::FaultModel::one_third;
  const auto csv = run_shard_size(p);
  EXPECT_NE(csv.find("infeasible"), std::string::npos) << csv;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(ShardSizeCommand, SameSeedSameBytes) {
  ShardSizeParams p;
  p.nodes = {200};
  p.repetitions = 3;
  p.iterations = 200;
  EXPECT_EQ(run_shard_size(p), run_shard_size(p));
}

TEST(Tool, RerunReproducesOutput) {
  TempDir dir;
  const auto out = dir / "fp.csv";
  ASSERT_EQ(run_tool("failure-prob -N 300 -m 600 -r 11,21 --repetitions 2 --iterations 200 --workers 2 --seed 4 --out " +
                     out.string()),
            0);
  ASSERT_TRUE(fs::exists(manifest_path_for(out)));
  const auto original = read_file(out);
  EXPECT_EQ(execute(read_manifest(manifest_path_for(out))), original);
  EXPECT_EQ(run_tool("rerun --manifest " + manifest_path_for(out).string()), 0);
  EXPECT_EQ(read_file(out), original);
}

TEST(Tool, RerunDetectsTamperedOutput) {
  TempDir dir;
  const auto out = dir / "ss.csv";
  ASSERT_EQ(run_tool("shard-size -N 200 --repetitions 2 --iterations 100 --out " + out.string()), 0);
  write_file(out, read_file(out) + "tampered\n");
  EXPECT_EQ(run_tool("rerun --manifest " + manifest_path_for(out).string() + " --out " + (dir / "again.csv").string()),
            1);
}

TEST(Tool, ProtocolExitCodes) {
  TempDir dir;
  const auto good = dir / "good.json";
  write_file(good, R"({"nodes": 8, "r": 3, "accounts": ["x", "y"],
    "transactions": [{"at": 0, "from": "x", "to": "y", "amount": 4}],
    "assert": {"all_committed": true}})");
  EXPECT_EQ(run_tool("protocol --scenario " + good.string() + " --out " + (dir / "t1.jsonl").string()), 0);

  const auto failing = dir / "failing.json";
  write_file(failing, R"({"nodes": 8, "r": 3, "accounts": {"x": {"balance": 1}, "y": null},
    "transactions": [{"at": 0, "from": "x", "to": "y", "amount": 4}],
    "assert": {"all_committed": true}})");
  EXPECT_EQ(run_tool("protocol --scenario " + failing.string() + " --out " + (dir / "t2.jsonl").string()), 1);

  const auto broken = dir / "broken.json";
  write_file(broken, R"({"nodes": 8, "r": 3, "acounts": []})");
  EXPECT_EQ(run_tool("protocol --scenario " + broken.string() + " --out " + (dir / "t3.jsonl").string()), 2);
  EXPECT_EQ(run_tool("shard-size --fault-model 1/4"), 2);
}

}  // namespace
}  // namespace scalegraph::cli
