#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scalegraph/consensus.hpp"
#include "scalegraph/replica.hpp"
#include "scalegraph/ident.hpp"
#include "scalegraph/ledger.hpp"

namespace scalegraph::simnet {

using consensus::Time;
using ledger::Amount;

struct LatencyModel {
  Time delta = 100000;
  Time min = 5000;
  Time max = 50000;
  /// Added to every message touching a node during a sluggish interval.
  Time sluggish_extra = 100000;
};

/// One message delay. Prompt samples are uniform on [min, max] and never
/// exceed delta; sluggish ones add sluggish_extra on top.
Time deliver_latency(std::mt19937_64& rng, const LatencyModel& model, bool sluggish);

struct Interval {
  Time begin = 0;
  Time end = 0;
  bool contains(Time t) const noexcept { return t >= begin && t < end; }
};

/// Picks a node either by id or as the rank-th closest to a named account in
/// the initial network (rank 0 is the account's first leader).
struct NodeSelector {
  std::optional<Identifier> id;
  std::string closest_to;
  std::size_t rank = 0;
};

enum class Behavior { honest, crash, sluggish, byzantine };

const char* to_string(Behavior behavior) noexcept;

struct FaultSpec {
  NodeSelector node;
  Behavior behavior = Behavior::honest;
  Time at = 0;                      // crash time
  std::vector<Interval> intervals;  // sluggish periods
  consensus::Strategy strategy = consensus::Strategy::honest;
};

struct AccountSpec {
  std::string name;
  std::optional<Identifier> id;
  std::optional<Amount> balance;
};

struct TxSpec {
  std::string label;
  Time at = 0;
  std::string from;
  std::string to;
  Amount amount = 0;
  /// Assigned 1, 2, ... per sender in script order when absent.
  std::optional<std::uint64_t> nonce;
  std::optional<NodeSelector> via;
};

struct ChurnEvent {
  Time at = 0;
  bool join = true;
  /// Joining id (random when absent) or leaving node (random member when absent).
  std::optional<NodeSelector> node;
};

struct PoissonChurn {
  /// Expected joins and leaves per delta.
  double join_rate = 0;
  double leave_rate = 0;
  Time until = 0;
};

enum class ResolverKind { oracle, lookup };

struct ViewChangeCheck {
  std::string account;
  std::optional<std::uint64_t> exactly;
  std::optional<std::uint64_t> min;
  std::optional<std::uint64_t> max;
};

struct LatencyCheck {
  std::size_t tx = 0;
  Time min = 0;
  Time max = 0;
};

struct Assertions {
  bool all_committed = false;
  std::vector<std::size_t> committed;
  std::vector<std::size_t> not_committed;
  bool no_conflicts = true;
  bool no_overdrafts = true;
  std::vector<ViewChangeCheck> view_changes;
  std::vector<LatencyCheck> latency;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  unsigned id_bits = 32;
  std::size_t node_count = 0;
  /// Explicit ids; random ids fill up to node_count.
  std::vector<Identifier> node_ids;
  consensus::ProtocolConfig protocol;
  LatencyModel latency;
  ResolverKind resolver = ResolverKind::oracle;
  std::size_t bucket_capacity = 20;
  std::vector<AccountSpec> accounts;
  Amount default_balance = ledger::kDefaultInitialGrant;
  std::vector<FaultSpec> faults;
  std::vector<TxSpec> transactions;
  std::vector<ChurnEvent> churn;
  std::optional<PoissonChurn> poisson;
  /// Defaults to the last scripted event plus 200 delta.
  std::optional<Time> horizon;
  bool trace_messages = true;
  Assertions assertions;

  /// Throws ScenarioError on inconsistent settings.
  void validate() const;
  std::size_t tx_index(const std::string& label_or_index) const;
};

class ScenarioError : public std::runtime_error {
public:
  ScenarioError(std::string where, const std::string& message)
      : std::runtime_error(where.empty() ? message : where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

Scenario parse_scenario(const nlohmann::json& doc);
/// JSON syntax errors are reported as "line L, column C".
Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

struct TxOutcome {
  std::string label;
  Digest id{};
  Identifier sender;
  Identifier receiver;
  Amount amount = 0;
  std::uint64_t nonce = 0;
  Time injected = 0;
  std::optional<Time> first_commit;
  /// Honest nodes that committed the transaction.
  std::size_t honest_commits = 0;

  bool committed() const noexcept { return first_commit.has_value(); }
};

struct SafetyReport {
  /// "(account, height)" positions where two honest chains disagree.
  std::vector<std::string> conflicts;
  /// Honest chains whose balance ever went negative.
  std::vector<std::string> overdrafts;
};

struct RunResult {
  Time end_time = 0;
  Time horizon = 0;
  std::uint64_t events = 0;
  std::uint64_t messages = 0;
  /// Stopped at the horizon with transactions still uncommitted.
  bool horizon_exceeded = false;
  std::vector<TxOutcome> txs;
  /// Highest view any honest node reached, by account name.
  std::map<std::string, std::uint64_t> max_view;
  SafetyReport safety;
  /// Lookup statistics when the lookup resolver is used.
  std::uint64_t lookups = 0;
  std::size_t max_lookup_rounds = 0;
};

struct AssertionResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<AssertionResult> evaluate_assertions(const Scenario& scenario, const RunResult& result);

/// Deterministic discrete-event run of one scenario. The trace, when a stream
/// is given, is JSON lines with a fixed field order.
class Simulator {
public:
  explicit Simulator(Scenario scenario, std::ostream* trace = nullptr);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  RunResult run();

  const Scenario& scenario() const noexcept;
  const Identifier& account_id(const std::string& name) const;
  /// Current members (excluding departed nodes), sorted.
  std::vector<Identifier> members() const;
  const consensus::Replica* replica(const Identifier& node) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scalegraph::simnet
