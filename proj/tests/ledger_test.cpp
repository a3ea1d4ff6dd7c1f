#include <map>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "scalegraph/ledger.hpp"
#include "scalegraph/ledger_json.hpp"
#include "scalegraph/random.hpp"

namespace scalegraph::ledger {
namespace {

Identifier id(std::uint64_t v) { return Identifier(v); }

/// Builds committed blocks against a set of reference chains, as an honest
/// validator group would.
class Workbench {
public:
  explicit Workbench(Amount grant = 1000) : auth_(77), grant_(grant) {}

  AccountChain& chain(const Identifier& a) {
    return chains_.try_emplace(a, a, grant_).first->second;
  }

  Transaction tx(const Identifier& from, const Identifier& to, Amount amount) {
    return make_transaction(from, to, amount, ++nonces_[from], auth_.signer_for(from));
  }

  Block block_for(const Transaction& t) {
    Block b;
    b.tx = t;
    b.sender_validators = {id(100)};
    b.receiver_validators = {id(200)};
    b.sender_parent = chain(t.sender).tip();
    b.receiver_parent = chain(t.receiver).tip();
    b.seal();
    return b;
  }

  /// Validates, builds and appends to both chains. Returns the block.
  Block commit(const Identifier& from, const Identifier& to, Amount amount) {
    const Transaction t = tx(from, to, amount);
    EXPECT_TRUE(validate_transaction(t, chain(from), auth_));
    const Block b = block_for(t);
    EXPECT_EQ(chain(from).append(b), AppendResult::appended);
    EXPECT_EQ(chain(to).append(b), AppendResult::appended);
    return b;
  }

  std::vector<AccountChain> all() const {
    std::vector<AccountChain> out;
    for (const auto& [_, c] : chains_) out.push_back(c);
    return out;
  }

  const Authenticator& auth() const { return auth_; }

private:
  Authenticator auth_;
  Amount grant_;
  std::map<Identifier, AccountChain> chains_;
  std::map<Identifier, std::uint64_t> nonces_;
};

TEST(Validate, BalanceModel) {
  Workbench w(100);
  EXPECT_TRUE(validate_transaction(w.tx(id(1), id(2), 50), w.chain(id(1)), w.auth()));
  EXPECT_EQ(validate_transaction(w.tx(id(1), id(2), 150), w.chain(id(1)), w.auth()).verdict,
            Verdict::insufficient_balance);
}

TEST(Validate, DoubleSpendAppliedSequentially) {
  Workbench w(100);
  const Transaction first = w.tx(id(1), id(2), 80);
  const Transaction second = w.tx(id(1), id(3), 80);
  ASSERT_TRUE(validate_transaction(first, w.chain(id(1)), w.auth()));
  ASSERT_TRUE(validate_transaction(second, w.chain(id(1)), w.auth()));
  const Block b = w.block_for(first);
  ASSERT_EQ(w.chain(id(1)).append(b), AppendResult::appended);
  ASSERT_EQ(w.chain(id(2)).append(b), AppendResult::appended);
  EXPECT_EQ(validate_transaction(second, w.chain(id(1)), w.auth()).verdict, Verdict::insufficient_balance);
  // Summation oracle.
  Amount expected = 100;
  for (const auto& blk : w.chain(id(1)).blocks()) expected -= blk.tx.amount;
  EXPECT_EQ(w.chain(id(1)).balance(), expected);
  EXPECT_EQ(w.chain(id(2)).balance(), 180);
}

TEST(Validate, ReplaySignatureAndShape) {
  Workbench w;
  const Block b = w.commit(id(1), id(2), 10);
  Transaction replay = b.tx;
  EXPECT_EQ(validate_transaction(replay, w.chain(id(1)), w.auth()).verdict, Verdict::replay);

  Transaction forged = w.tx(id(1), id(2), 10);
  forged.amount = 11;
  EXPECT_EQ(validate_transaction(forged, w.chain(id(1)), w.auth()).verdict, Verdict::bad_signature);

  // Signed with someone else's key.
  Transaction stolen = make_transaction(id(1), id(2), 5, 99, w.auth().signer_for(id(3)));
  EXPECT_EQ(validate_transaction(stolen, w.chain(id(1)), w.auth()).verdict, Verdict::bad_signature);

  EXPECT_EQ(validate_transaction(w.tx(id(1), id(1), 5), w.chain(id(1)), w.auth()).verdict, Verdict::malformed);
  EXPECT_EQ(validate_transaction(w.tx(id(1), id(2), 0), w.chain(id(1)), w.auth()).verdict, Verdict::malformed);
  EXPECT_EQ(validate_transaction(w.tx(id(2), id(1), 5), w.chain(id(1)), w.auth()).verdict, Verdict::malformed);
}

TEST(Append, GenesisAndStaleParent) {
  Workbench w;
  const Block b1 = w.commit(id(1), id(2), 10);
  EXPECT_EQ(w.chain(id(1)).height(), 1u);
  EXPECT_TRUE(b1.sender_parent.is_genesis());

  Block stale = w.block_for(w.tx(id(1), id(2), 10));
  stale.sender_parent = ChainRef::genesis();
  stale.seal();
  EXPECT_EQ(w.chain(id(1)).append(stale), AppendResult::parent_mismatch);
  EXPECT_EQ(w.chain(id(3)).append(b1), AppendResult::not_involved);

  Block tampered = w.block_for(w.tx(id(1), id(2), 10));
  tampered.tx.amount = 1;
  EXPECT_EQ(w.chain(id(1)).append(tampered), AppendResult::bad_hash);
}

TEST(Append, BalanceNeverNegativeAfterAcceptedSequence) {
  Workbench w(50);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const Identifier from = id(1 + bounded(rng, 5));
    Identifier to = id(1 + bounded(rng, 5));
    if (to == from) continue;
    const Transaction t = w.tx(from, to, 1 + static_cast<Amount>(bounded(rng, 60)));
    if (!validate_transaction(t, w.chain(from), w.auth())) continue;
    const Block b = w.block_for(t);
    ASSERT_EQ(w.chain(from).append(b), AppendResult::appended);
    ASSERT_EQ(w.chain(to).append(b), AppendResult::appended);
  }
  for (const auto& c : w.all()) EXPECT_GE(c.min_prefix_balance(), 0);
}

TEST(GetBlocks, Ranges) {
  Workbench w;
  for (int i = 0; i < 5; ++i) w.commit(id(1), id(2), 1);
  const auto& c = w.chain(id(1));
  ASSERT_EQ(c.get_blocks(5, 5).size(), 1u);
  EXPECT_EQ(c.get_blocks(5, 5).front(), c.blocks().back());
  EXPECT_TRUE(c.get_blocks(6, 9).empty());
  EXPECT_EQ(c.get_blocks(2, 99).size(), 4u);
  EXPECT_TRUE(c.get_blocks(0, 3).empty());
}

TEST(Sync, GapFillConvergesToIdenticalChain) {
  Workbench w;
  AccountChain lagging(id(1), 1000);
  for (int i = 0; i < 7; ++i) {
    const Block b = w.commit(id(1), id(2), 3);
    if (i < 4) {
      ASSERT_EQ(lagging.append(b), AppendResult::appended);
    }
  }
  const AccountChain& reference = w.chain(id(1));
  const auto gap = plan_gap_fill(lagging, reference.tip().height);
  ASSERT_TRUE(gap);
  EXPECT_EQ(gap->from, 5u);
  EXPECT_EQ(gap->to, 7u);
  const auto blocks = reference.get_blocks(gap->from, gap->to);
  EXPECT_EQ(apply_blocks(lagging, blocks), 3u);
  EXPECT_EQ(lagging, reference);
  EXPECT_FALSE(plan_gap_fill(lagging, 7));
}

TEST(Replication, TickActions) {
  const ReplicationConfig config;
  ReplicationState st;
  const std::vector<Identifier> with_self{id(1), id(2)};
  const std::vector<Identifier> without_self{id(2), id(3)};
  EXPECT_EQ(replication_tick(st, id(1), with_self, config), ReplicationAction::replicate_and_reschedule);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(replication_tick(st, id(1), without_self, config), ReplicationAction::replicate_and_decrement);
  }
  EXPECT_EQ(st.remaining, 0u);
  EXPECT_EQ(replication_tick(st, id(1), without_self, config), ReplicationAction::start_drop_timer);
  EXPECT_EQ(replication_tick(st, id(1), without_self, config), ReplicationAction::idle);
  // Becoming responsible again resets the countdown.
  EXPECT_EQ(replication_tick(st, id(1), with_self, config), ReplicationAction::replicate_and_reschedule);
  EXPECT_EQ(st.remaining, 3u);
  EXPECT_FALSE(st.drop_pending);
}

// Four accounts, seven transactions: the example ledger used to motivate the
// DAG view.
struct ExampleLedger {
  Workbench w;
  Identifier A = id(0xA), B = id(0xB), C = id(0xC), D = id(0xD);
  std::vector<Block> order;

  ExampleLedger() {
    order.push_back(w.commit(A, B, 10));  // 0
    order.push_back(w.commit(A, C, 10));  // 1
    order.push_back(w.commit(D, C, 10));  // 2
    order.push_back(w.commit(D, A, 10));  // 3
    order.push_back(w.commit(B, C, 10));  // 4
    order.push_back(w.commit(A, C, 10));  // 5
    order.push_back(w.commit(D, B, 10));  // 6
  }
};

TEST(Dag, ExampleChainLengths) {
  ExampleLedger ex;
  EXPECT_EQ(ex.w.chain(ex.A).height(), 4u);
  EXPECT_EQ(ex.w.chain(ex.B).height(), 3u);
  EXPECT_EQ(ex.w.chain(ex.C).height(), 4u);
  EXPECT_EQ(ex.w.chain(ex.D).height(), 3u);
}

TEST(Dag, ExamplePartialOrder) {
  ExampleLedger ex;
  const auto chains = ex.w.all();
  const TransactionDag dag = build_dag(chains);
  ASSERT_EQ(dag.size(), 7u);
  EXPECT_TRUE(dag.acyclic());
  auto at = [&](std::size_t i) { return *dag.index_of(ex.order[i].hash); };
  // A->B, A->C, D->C form a chain.
  EXPECT_TRUE(dag.happens_before(at(0), at(1)));
  EXPECT_TRUE(dag.happens_before(at(1), at(2)));
  // D->A and B->C are concurrent.
  EXPECT_FALSE(dag.happens_before(at(3), at(4)));
  EXPECT_FALSE(dag.happens_before(at(4), at(3)));
  // The last two depend on both of them.
  for (std::size_t last : {5u, 6u}) {
    EXPECT_TRUE(dag.happens_before(at(3), at(last)));
    EXPECT_TRUE(dag.happens_before(at(4), at(last)));
  }
  EXPECT_FALSE(dag.happens_before(at(5), at(6)));
}

TEST(Dag, SingleChainIsAPath) {
  Workbench w;
  for (int i = 0; i < 6; ++i) w.commit(id(1), id(2 + i), 1);
  const std::vector<AccountChain> one{w.chain(id(1))};
  const auto dag = build_dag(one);
  ASSERT_EQ(dag.size(), 6u);
  const auto order = dag.topological_order();
  ASSERT_TRUE(order);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(dag.blocks()[(*order)[i]], w.chain(id(1)).blocks()[i]);
}

TEST(Dag, RandomWorkloadProjectsBackToEveryChain) {
  Workbench w(1000000);
  std::mt19937_64 rng(21);
  int committed = 0;
  while (committed < 200) {
    const Identifier from = id(1 + bounded(rng, 12));
    const Identifier to = id(1 + bounded(rng, 12));
    if (from == to) continue;
    w.commit(from, to, 1 + static_cast<Amount>(bounded(rng, 100)));
    ++committed;
  }
  const auto chains = w.all();
  const auto dag = build_dag(chains);
  EXPECT_EQ(dag.size(), 200u);
  ASSERT_TRUE(dag.acyclic());
  for (const auto& c : chains) EXPECT_EQ(dag.project(c.account()), c.blocks());
}

TEST(Dag, ConflictingContentIsRejected) {
  Workbench w;
  w.commit(id(1), id(2), 10);
  Workbench other;
  other.commit(id(1), id(3), 10);  // same sender and nonce, different block
  const std::vector<AccountChain> chains{w.chain(id(2)), other.chain(id(3))};
  EXPECT_THROW(build_dag(chains), DagInconsistency);
}

TEST(ChainStore, UsesGenesisGrants) {
  Genesis g;
  g.default_grant = 7;
  g.grants[id(5)] = 500;
  ChainStore store(&g);
  EXPECT_EQ(store.ensure(id(5)).balance(), 500);
  EXPECT_EQ(store.ensure(id(6)).balance(), 7);
  EXPECT_TRUE(store.holds(id(6)));
  EXPECT_TRUE(store.drop(id(6)));
  EXPECT_EQ(store.find(id(6)), nullptr);
}

TEST(JsonLines, RoundTripAndCorruption) {
  ExampleLedger ex;
  const IdSpace space(32);
  const AccountChain& c = ex.w.chain(ex.C);
  const std::string text = export_chain_jsonl(c, space);
  std::istringstream in(text);
  EXPECT_EQ(import_chain_jsonl(in, ex.C, 1000, space), c);

  std::string broken = text;
  const auto pos = broken.find("\"amount\":10");
  ASSERT_NE(pos, std::string::npos);
  broken.replace(pos, 11, "\"amount\":11");
  std::istringstream bad(broken);
  EXPECT_THROW(import_chain_jsonl(bad, ex.C, 1000, space), std::invalid_argument);
}

TEST(BlockHash, CoversEveryField) {
  Workbench w;
  const Block base = w.block_for(w.tx(id(1), id(2), 5));
  auto changed = [&](auto mutate) {
    Block b = base;
    mutate(b);
    return b.compute_hash() != base.hash;
  };
  EXPECT_TRUE(changed([](Block& b) { b.tx.nonce += 1; }));
  EXPECT_TRUE(changed([](Block& b) { b.sender_validators.push_back(id(9)); }));
  EXPECT_TRUE(changed([](Block& b) { b.receiver_parent.height = 4; }));
  EXPECT_TRUE(changed([](Block& b) { b.prev_votes = std::vector<SignedVote>{}; }));
  EXPECT_TRUE(base.hash_valid());
}

}  // namespace
}  // namespace scalegraph::ledger
