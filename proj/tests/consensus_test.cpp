#include <algorithm>
#include <map>

#include <gtest/gtest.h>

#include "scalegraph/consensus.hpp"
#include "scalegraph/routing.hpp"
#include "scenario_util.hpp"
#include "stable_network.hpp"

namespace scalegraph::consensus {
namespace {

using testing::add_account;
using testing::add_tx;
using testing::make_scenario;
using testing::nth_closest;
using testing::run_traced;

Identifier id(std::uint64_t v) { return Identifier(v); }

std::vector<Identifier> ids(std::initializer_list<std::uint64_t> values) {
  std::vector<Identifier> out;
  for (auto v : values) out.push_back(id(v));
  return out;
}

TEST(Quorum, Size) {
  EXPECT_EQ(quorum_size(1), 1u);
  EXPECT_EQ(quorum_size(4), 3u);
  EXPECT_EQ(quorum_size(5), 3u);
  EXPECT_EQ(quorum_size(61), 31u);
}

TEST(CountVotes, LopsidedVotesFailPerGroupButPassNaive) {
  const auto group = make_group(ids({1, 2, 3, 4, 5}), ids({11, 12, 13, 14, 15}));
  ASSERT_EQ(group.union_v.size(), 10u);
  const auto voters = ids({1, 2, 3, 4, 5, 11, 12});
  const auto per_group = count_votes(voters, group);
  EXPECT_EQ(per_group.sender_votes, 5u);
  EXPECT_EQ(per_group.receiver_votes, 2u);
  EXPECT_FALSE(per_group.quorum);
  EXPECT_TRUE(count_votes(voters, group, VoteCounting::naive).quorum);

  const auto mirrored = ids({1, 2, 11, 12, 13, 14, 15});
  EXPECT_FALSE(count_votes(mirrored, group).quorum);
  EXPECT_TRUE(count_votes(mirrored, group, VoteCounting::naive).quorum);
}

TEST(CountVotes, QuorumInEachGroup) {
  const auto group = make_group(ids({1, 2, 3, 4, 5}), ids({11, 12, 13, 14, 15}));
  EXPECT_TRUE(count_votes(ids({1, 2, 3, 11, 12, 13}), group).quorum);
  EXPECT_FALSE(count_votes(ids({1, 2, 11, 12, 13}), group).quorum);
}

TEST(CountVotes, DegenerateSingleNodeGroups) {
  const auto group = make_group(ids({1}), ids({2}));
  EXPECT_TRUE(count_votes(ids({1, 2}), group).quorum);
  EXPECT_FALSE(count_votes(ids({1}), group).quorum);
}

TEST(CountVotes, OverlapVotersCountForBothGroups) {
  const auto group = make_group(ids({1, 2, 3}), ids({3, 2, 9}));
  EXPECT_EQ(group.union_v.size(), 4u);
  const auto v = count_votes(ids({2, 3}), group);
  EXPECT_EQ(v.sender_votes, 2u);
  EXPECT_EQ(v.receiver_votes, 2u);
  EXPECT_EQ(v.total_votes, 2u);
  EXPECT_TRUE(v.quorum);
}

TEST(CountVotes, DuplicatesAndOutsidersIgnored) {
  const auto group = make_group(ids({1, 2, 3}), ids({4, 5, 6}));
  const auto v = count_votes(ids({1, 1, 1, 4, 4, 4, 99}), group);
  EXPECT_EQ(v.sender_votes, 1u);
  EXPECT_EQ(v.receiver_votes, 1u);
  EXPECT_EQ(v.total_votes, 2u);
}

TEST(LockOrder, SmallerAccountLocksFirst) {
  EXPECT_EQ(lock_order(id(3), id(9)), LockOrder::lock_before_request);
  EXPECT_EQ(lock_order(id(9), id(3)), LockOrder::lock_after_reply);
  EXPECT_THROW(lock_order(id(3), id(3)), std::invalid_argument);
}

TEST(Parsing, NamesRoundTrip) {
  for (auto s : {Strategy::honest, Strategy::equivocate, Strategy::vote_invalid, Strategy::silent, Strategy::stale_tip}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  for (auto p : {DeadlockPolicy::proactive, DeadlockPolicy::optimistic}) EXPECT_EQ(parse_deadlock_policy(to_string(p)), p);
  for (auto c : {VoteCounting::per_group, VoteCounting::naive}) EXPECT_EQ(parse_vote_counting(to_string(c)), c);
  EXPECT_FALSE(parse_strategy("lazy"));
}

TEST(ValidatorGroup, PopulationOfExactlyR) {
  const auto nodes = ids({3, 50, 77, 200, 201});
  const ClosestFn closest = [&](const Identifier& t, std::size_t r) { return routing::oracle_closest(nodes, t, r); };
  Transaction tx;
  tx.sender = id(10);
  tx.receiver = id(240);
  const auto g = derive_validator_group(tx, closest, 5);
  EXPECT_EQ(g.union_v.size(), 5u);
  EXPECT_TRUE(std::is_permutation(g.r_s.begin(), g.r_s.end(), g.r_r.begin()));
  EXPECT_EQ(g.leader_s(), id(3));
  EXPECT_EQ(g.leader_r(), id(200));
}

TEST(ValidatorGroup, DisjointPrefixesGiveTwiceR) {
  // Eight-bit ids: three nodes under prefix 000 and three under 111.
  const auto nodes = ids({0x01, 0x05, 0x09, 0xe1, 0xe5, 0xe9});
  const ClosestFn closest = [&](const Identifier& t, std::size_t r) { return routing::oracle_closest(nodes, t, r); };
  Transaction tx;
  tx.sender = id(0x02);
  tx.receiver = id(0xe2);
  const auto g = derive_validator_group(tx, closest, 3);
  EXPECT_EQ(g.union_v.size(), 6u);
  EXPECT_EQ(g.r_s, ids({0x01, 0x05, 0x09}));
  EXPECT_EQ(g.r_r, ids({0xe1, 0xe5, 0xe9}));
}

TEST(ValidatorGroup, LookupMatchesOracle) {
  const testing::StableNetwork net(17, 400);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 40; ++i) {
    Transaction tx;
    tx.sender = random_identifier(rng, net.space);
    tx.receiver = random_identifier(rng, net.space);
    const auto& start = net.table(net.nodes[bounded(rng, net.nodes.size())]);
    const ClosestFn by_lookup = [&](const Identifier& t, std::size_t r) {
      return routing::iterative_find_nodes(net.endpoint(), start, t, r).nodes;
    };
    const ClosestFn by_oracle = [&](const Identifier& t, std::size_t r) {
      return routing::oracle_closest(net.nodes, t, r);
    };
    const auto a = derive_validator_group(tx, by_lookup, 7);
    const auto b = derive_validator_group(tx, by_oracle, 7);
    EXPECT_EQ(a.r_s, b.r_s);
    EXPECT_EQ(a.r_r, b.r_r);
  }
}

// Protocol runs through the simulator.

simnet::Scenario pair_scenario(std::uint64_t seed, std::size_t nodes = 12, std::size_t r = 5) {
  auto s = make_scenario("pair", seed, nodes, r);
  add_account(s, "alice");
  add_account(s, "bob");
  return s;
}

TEST(Protocol, HonestTransferCommitsOnBothChainsEverywhere) {
  auto s = pair_scenario(21);
  add_tx(s, "pay", 0, "alice", "bob", 100);
  std::ostringstream trace;
  simnet::Simulator sim(s, &trace);
  const auto result = sim.run();
  ASSERT_TRUE(result.txs[0].committed());
  EXPECT_FALSE(result.horizon_exceeded);

  const Identifier alice = sim.account_id("alice");
  const Identifier bob = sim.account_id("bob");
  std::optional<ledger::AccountChain> alice_ref, bob_ref;
  std::size_t holders = 0;
  for (const auto& n : sim.members()) {
    const auto* rep = sim.replica(n);
    if (const auto* c = rep->chains().find(alice)) {
      ++holders;
      EXPECT_EQ(c->height(), 1u);
      EXPECT_EQ(c->balance(), 900);
      if (!alice_ref) alice_ref = *c;
      EXPECT_EQ(*c, *alice_ref) << "replicas disagree";
    }
    if (const auto* c = rep->chains().find(bob)) {
      EXPECT_EQ(c->balance(), 1100);
      if (!bob_ref) bob_ref = *c;
      EXPECT_EQ(*c, *bob_ref);
    }
  }
  EXPECT_EQ(holders, 5u);
}

TEST(Protocol, PrecommitWaitsTwoDelta) {
  auto s = pair_scenario(22);
  add_tx(s, "pay", 0, "alice", "bob", 1);
  const auto run = run_traced(s);
  std::map<std::string, std::int64_t> certified;
  for (const auto& e : run.of("certified")) certified.emplace(e["node"], e["t"]);
  const auto precommits = run.of("precommit");
  ASSERT_FALSE(precommits.empty());
  for (const auto& e : precommits) {
    const auto it = certified.find(e["node"]);
    ASSERT_NE(it, certified.end());
    const std::int64_t waited = e["t"].get<std::int64_t>() - it->second;
    EXPECT_GE(waited, 2 * s.protocol.delta);
    // The forward quorum that also gates the timer arrives within one delta.
    EXPECT_LE(waited, 3 * s.protocol.delta);
  }
}

TEST(Protocol, NoTransactionsNoViewChange) {
  auto s = pair_scenario(23);
  s.horizon = 100 * s.protocol.delta;
  const auto run = run_traced(s);
  EXPECT_EQ(run.count("view-change"), 0u);
  EXPECT_EQ(run.count("blame"), 0u);
  EXPECT_EQ(run.count("commit"), 0u);
}

TEST(Protocol, CrashedSenderLeaderReplacedByNextClosest) {
  auto s = pair_scenario(1);
  simnet::FaultSpec crash;
  crash.node = nth_closest("alice", 0);
  crash.behavior = simnet::Behavior::crash;
  s.faults.push_back(crash);
  add_tx(s, "pay", 0, "alice", "bob", 300);
  const auto run = run_traced(s);
  ASSERT_TRUE(run.result.txs[0].committed());
  EXPECT_EQ(run.result.max_view.at("alice"), 1u);
  const auto changes = run.of("view-change");
  ASSERT_FALSE(changes.empty());
  const auto proposals = run.of("propose");
  ASSERT_FALSE(proposals.empty());
  EXPECT_EQ(proposals.back()["view"], 1);
}

TEST(Protocol, EquivocatingLeaderNeverForksTheChain) {
  for (std::uint64_t seed : {9, 10, 11, 12}) {
    auto s = pair_scenario(seed);
    simnet::FaultSpec f;
    f.node = nth_closest("alice", 0);
    f.behavior = simnet::Behavior::byzantine;
    f.strategy = Strategy::equivocate;
    s.faults.push_back(f);
    add_tx(s, "pay", 0, "alice", "bob", 300);
    const auto run = run_traced(s);
    EXPECT_TRUE(run.result.safety.conflicts.empty()) << "seed " << seed;
    EXPECT_TRUE(run.result.txs[0].committed()) << "seed " << seed;
    EXPECT_GE(run.count("equivocation-detected"), 1u);
    EXPECT_GE(run.result.max_view.at("alice"), 1u);
  }
}

TEST(Protocol, StaleTipProposalGetsNoHonestVotes) {
  auto s = pair_scenario(31);
  simnet::FaultSpec f;
  f.node = nth_closest("alice", 0);
  f.behavior = simnet::Behavior::byzantine;
  f.strategy = Strategy::stale_tip;
  s.faults.push_back(f);
  add_tx(s, "first", 0, "alice", "bob", 10);
  add_tx(s, "second", 20 * s.protocol.delta, "alice", "bob", 10);
  const auto run = run_traced(s);
  std::size_t stale = 0;
  for (const auto& e : run.of("vote-withheld")) stale += e["reason"] == "stale-parent";
  EXPECT_GE(stale, 1u);
  EXPECT_TRUE(run.result.safety.conflicts.empty());
  EXPECT_TRUE(run.result.txs[0].committed());
  EXPECT_TRUE(run.result.txs[1].committed());
}

/// Records everything a lone replica does.
class FakeEnv : public Environment {
public:
  explicit FakeEnv(std::vector<Identifier> nodes) : nodes_(std::move(nodes)) {}
  Time now() const override { return 0; }
  void send(const Identifier& to, Message message) override { sent.emplace_back(to, std::move(message)); }
  TimerId schedule(Time, const TimerTag&) override { return ++timers; }
  void cancel(TimerId) override {}
  std::vector<Identifier> closest(const Identifier& target, std::size_t count) override {
    return routing::oracle_closest(nodes_, target, count);
  }
  std::int64_t random_between(std::int64_t lo, std::int64_t) override { return lo; }
  void record(const char* event, nlohmann::ordered_json fields) override {
    events.emplace_back(event, std::move(fields));
  }

  std::size_t sent_of(std::size_t index) const {
    return static_cast<std::size_t>(
        std::count_if(sent.begin(), sent.end(), [&](const auto& m) { return m.second.index() == index; }));
  }
  bool recorded(const std::string& event) const {
    return std::any_of(events.begin(), events.end(), [&](const auto& e) { return e.first == event; });
  }

  std::vector<std::pair<Identifier, Message>> sent;
  std::vector<std::pair<std::string, nlohmann::ordered_json>> events;
  TimerId timers = 0;

private:
  std::vector<Identifier> nodes_;
};

struct LoneReplica {
  Authenticator auth{5};
  ledger::Genesis genesis;
  ProtocolConfig config;
  FakeEnv env{ids({1, 2, 3, 0x100, 0x101, 0x102})};
  Identifier alice = id(0);
  Identifier bob = id(0x103);
  std::optional<Replica> replica;

  LoneReplica() {
    config.r = 3;
    replica.emplace(id(2), env, auth, genesis, config);
  }

  ProposalData proposal(std::vector<Identifier> r_s, std::vector<Identifier> r_r) const {
    ProposalData p;
    p.block.tx = ledger::make_transaction(alice, bob, 10, 1, auth.signer_for(alice));
    p.block.sender_validators = std::move(r_s);
    p.block.receiver_validators = std::move(r_r);
    p.block.seal();
    p.leader = id(1);
    p.signature = auth.signer_for(id(1)).sign(ProposalData::signing_digest(p.block.hash, 0));
    return p;
  }
};

constexpr std::size_t kVoteIndex = 8;
static_assert(std::is_same_v<std::variant_alternative_t<kVoteIndex, Message>, Vote>);

TEST(Replica, VotesForWellFormedProposal) {
  LoneReplica lone;
  lone.replica->on_message(id(1), Proposal{lone.proposal(ids({1, 2, 3}), ids({0x102, 0x101, 0x100}))});
  EXPECT_TRUE(lone.env.recorded("vote"));
  EXPECT_GT(lone.env.sent_of(kVoteIndex), 0u);
}

TEST(Replica, RejectsProposalWithWrongValidatorList) {
  LoneReplica lone;
  lone.replica->on_message(id(1), Proposal{lone.proposal(ids({1, 2, 3}), ids({0x100, 0x101, 0x102}))});
  EXPECT_TRUE(lone.env.recorded("proposal-rejected"));
  EXPECT_EQ(lone.env.sent_of(kVoteIndex), 0u);
}

TEST(Replica, IgnoresProposalNotSignedByItsLeader) {
  LoneReplica lone;
  auto p = lone.proposal(ids({1, 2, 3}), ids({0x102, 0x101, 0x100}));
  p.signature = lone.auth.signer_for(id(3)).sign(ProposalData::signing_digest(p.block.hash, 0));
  lone.replica->on_message(id(1), Proposal{p});
  EXPECT_EQ(lone.env.sent_of(kVoteIndex), 0u);
  EXPECT_FALSE(lone.env.recorded("vote"));
}

TEST(Replica, SenderSideRefusesOverdraft) {
  LoneReplica lone;
  auto p = lone.proposal(ids({1, 2, 3}), ids({0x102, 0x101, 0x100}));
  p.block.tx = ledger::make_transaction(lone.alice, lone.bob, 5000, 1, lone.auth.signer_for(lone.alice));
  p.block.seal();
  p.signature = lone.auth.signer_for(id(1)).sign(ProposalData::signing_digest(p.block.hash, 0));
  lone.replica->on_message(id(1), Proposal{p});
  EXPECT_TRUE(lone.env.recorded("vote-withheld"));
  EXPECT_EQ(lone.env.sent_of(kVoteIndex), 0u);
}

TEST(Protocol, SecondRequestForBusyReceiverIsDeferred) {
  auto s = make_scenario("busy", 51, 15, 5);
  add_account(s, "a");
  add_account(s, "b");
  add_account(s, "c");
  add_tx(s, "a-c", 0, "a", "c", 10).via = nth_closest("a", 0);
  add_tx(s, "b-c", 0, "b", "c", 10).via = nth_closest("b", 0);
  add_tx(s, "a-c-again", 30 * s.protocol.delta, "a", "c", 10);
  const auto run = run_traced(s);
  for (const auto& tx : run.result.txs) EXPECT_TRUE(tx.committed()) << tx.label;
  EXPECT_GE(run.count("tip-deferred"), 1u);
  std::vector<std::uint64_t> heights;
  for (const auto& e : run.of("propose")) heights.push_back(e["receiver_height"]);
  std::sort(heights.begin(), heights.end());
  heights.erase(std::unique(heights.begin(), heights.end()), heights.end());
  EXPECT_EQ(heights, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Protocol, DisjointPairsRunInParallel) {
  auto s = make_scenario("parallel", 61, 30, 5);
  for (const char* n : {"a", "b", "c", "d", "e", "f"}) add_account(s, n);
  add_tx(s, "ab", 0, "a", "b", 1);
  add_tx(s, "cd", 0, "c", "d", 1);
  add_tx(s, "ef", 0, "e", "f", 1);
  const auto run = run_traced(s);
  consensus::Time sum = 0, last = 0;
  for (const auto& tx : run.result.txs) {
    ASSERT_TRUE(tx.committed());
    sum += *tx.first_commit - tx.injected;
    last = std::max(last, *tx.first_commit);
  }
  EXPECT_LT(last, sum);
  // All three finish within one commit span of each other.
  EXPECT_LT(last, 2 * (sum / 3));
}

TEST(Protocol, ThreeCycleCompletesUnderBothPolicies) {
  for (auto policy : {DeadlockPolicy::proactive, DeadlockPolicy::optimistic}) {
    auto s = make_scenario("cycle", 5, 15, 5);
    s.protocol.deadlock_policy = policy;
    for (const char* n : {"a", "b", "c"}) add_account(s, n);
    add_tx(s, "ab", 0, "a", "b", 10).via = nth_closest("a", 0);
    add_tx(s, "bc", 0, "b", "c", 10).via = nth_closest("b", 0);
    add_tx(s, "ca", 0, "c", "a", 10).via = nth_closest("c", 0);
    const auto run = run_traced(s);
    for (const auto& tx : run.result.txs) EXPECT_TRUE(tx.committed()) << to_string(policy) << " " << tx.label;
    EXPECT_TRUE(run.result.safety.conflicts.empty());
  }
}

TEST(Protocol, SluggishReplicaCatchesUp) {
  auto s = pair_scenario(71);
  s.latency.sluggish_extra = 15 * s.protocol.delta;
  simnet::FaultSpec f;
  f.node = nth_closest("alice", 3);
  f.behavior = simnet::Behavior::sluggish;
  f.intervals = {simnet::Interval{0, 10 * s.protocol.delta}};
  s.faults.push_back(f);
  add_tx(s, "one", 0, "alice", "bob", 10);
  add_tx(s, "two", 40 * s.protocol.delta, "alice", "bob", 10);
  simnet::Simulator sim(s);
  const auto result = sim.run();
  ASSERT_TRUE(result.txs[0].committed());
  ASSERT_TRUE(result.txs[1].committed());
  const Identifier alice = sim.account_id("alice");
  std::optional<ledger::AccountChain> ref;
  for (const auto& n : routing::oracle_closest(sim.members(), alice, 5)) {
    const auto* c = sim.replica(n)->chains().find(alice);
    ASSERT_NE(c, nullptr);
    if (!ref) ref = *c;
    EXPECT_EQ(*c, *ref);
    EXPECT_EQ(c->height(), 2u);
  }
}

TEST(Protocol, OverdraftNeedsBothGroups) {
  for (auto mode : {VoteCounting::per_group, VoteCounting::naive}) {
    auto s = make_scenario("overdraft", 4, 20, 5);
    s.protocol.vote_counting = mode;
    add_account(s, "alice", 100, Identifier(0x10000000));
    add_account(s, "bob", 100, Identifier(0x90000000));
    simnet::FaultSpec f;
    f.node = nth_closest("alice", 0);
    f.behavior = simnet::Behavior::byzantine;
    f.strategy = Strategy::vote_invalid;
    s.faults.push_back(f);
    add_tx(s, "overdraft", 0, "alice", "bob", 5000).via = nth_closest("alice", 0);
    const auto run = run_traced(s);
    EXPECT_EQ(run.result.txs[0].committed(), mode == VoteCounting::naive) << to_string(mode);
  }
}

}  // namespace
}  // namespace scalegraph::consensus
