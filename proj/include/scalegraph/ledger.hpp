#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "scalegraph/auth.hpp"
#include "scalegraph/digest.hpp"
#include "scalegraph/ident.hpp"

namespace scalegraph::ledger {

using Amount = std::int64_t;

inline constexpr Amount kDefaultInitialGrant = 1000;

struct Transaction {
  Identifier sender;
  Identifier receiver;
  Amount amount = 0;
  std::uint64_t nonce = 0;
  Signature signature;

  /// Digest of the signed fields; doubles as the transaction id.
  Digest signing_digest() const;
  Digest id() const { return signing_digest(); }

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

Transaction make_transaction(const Identifier& sender, const Identifier& receiver, Amount amount,
                             std::uint64_t nonce, const Signer& sender_key);

/// (hash, height) of a chain position. Genesis is the zero hash at height 0.
struct ChainRef {
  Digest hash{};
  std::uint64_t height = 0;

  static ChainRef genesis() { return {}; }
  bool is_genesis() const noexcept { return height == 0; }
  friend bool operator==(const ChainRef&, const ChainRef&) = default;
};

/// A vote or commit message as carried inside certificates and blocks.
struct SignedVote {
  enum class Kind : std::uint8_t { vote, commit };

  Kind kind = Kind::vote;
  Identifier voter;
  Digest block_hash{};
  std::uint64_t view = 0;
  Signature signature;

  Digest signing_digest() const;
  static Digest signing_digest(Kind kind, const Digest& block_hash, std::uint64_t view);

  friend bool operator==(const SignedVote&, const SignedVote&) = default;
};

struct Block {
  Transaction tx;
  /// The r closest nodes to the sender and to the receiver, distance-ordered.
  std::vector<Identifier> sender_validators;
  std::vector<Identifier> receiver_validators;
  ChainRef sender_parent;
  ChainRef receiver_parent;
  std::optional<std::vector<SignedVote>> prev_votes;
  Digest hash{};

  Digest compute_hash() const;
  void seal() { hash = compute_hash(); }
  bool hash_valid() const { return hash == compute_hash(); }

  std::uint64_t sender_height() const noexcept { return sender_parent.height + 1; }
  std::uint64_t receiver_height() const noexcept { return receiver_parent.height + 1; }
  bool involves(const Identifier& account) const noexcept {
    return tx.sender == account || tx.receiver == account;
  }
  /// Parent link on the given account's chain. Requires involves(account).
  const ChainRef& parent_for(const Identifier& account) const;
  std::uint64_t height_for(const Identifier& account) const { return parent_for(account).height + 1; }
  /// Union of both validator lists, sender side first.
  std::vector<Identifier> validators() const;

  friend bool operator==(const Block&, const Block&) = default;
};

enum class Verdict { accept, bad_signature, insufficient_balance, replay, malformed };

const char* to_string(Verdict verdict) noexcept;

struct ValidationResult {
  Verdict verdict = Verdict::accept;
  explicit operator bool() const noexcept { return verdict == Verdict::accept; }
};

enum class AppendResult { appended, parent_mismatch, not_involved, bad_hash };

const char* to_string(AppendResult result) noexcept;

/// Append-only chain of the blocks touching one account.
class AccountChain {
public:
  AccountChain(Identifier account, Amount initial_grant);

  const Identifier& account() const noexcept { return account_; }
  Amount initial_grant() const noexcept { return initial_grant_; }
  Amount balance() const noexcept { return balance_; }
  std::uint64_t height() const noexcept { return blocks_.size(); }
  ChainRef tip() const;
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  /// Block at 1-based height, or nullptr.
  const Block* at(std::uint64_t height) const;
  /// Highest nonce this account has spent with, if any.
  std::optional<std::uint64_t> last_nonce() const noexcept { return last_nonce_; }
  bool contains(const Digest& block_hash) const;

  /// Extends the chain if block's parent link for this account is the tip.
  AppendResult append(const Block& block);

  /// Blocks with heights in [from, to], clipped to the tip.
  std::vector<Block> get_blocks(std::uint64_t from, std::uint64_t to) const;

  /// Smallest balance over all prefixes, including the empty one.
  Amount min_prefix_balance() const noexcept { return min_prefix_balance_; }

  friend bool operator==(const AccountChain& a, const AccountChain& b) {
    return a.account_ == b.account_ && a.initial_grant_ == b.initial_grant_ && a.blocks_ == b.blocks_;
  }

private:
  Identifier account_;
  Amount initial_grant_;
  Amount balance_;
  Amount min_prefix_balance_;
  std::optional<std::uint64_t> last_nonce_;
  std::vector<Block> blocks_;
};

/// Accepts iff the signature verifies, the sender chain's balance covers the
/// amount, and the nonce exceeds every nonce the sender has used.
ValidationResult validate_transaction(const Transaction& tx, const AccountChain& sender_chain,
                                      const Authenticator& auth);

/// Initial grants recorded out of band.
struct Genesis {
  Amount default_grant = kDefaultInitialGrant;
  std::unordered_map<Identifier, Amount> grants;

  Amount grant_for(const Identifier& account) const;
};

/// Chains held by one node.
class ChainStore {
public:
  explicit ChainStore(const Genesis* genesis) : genesis_(genesis) {}

  AccountChain& ensure(const Identifier& account);
  AccountChain* find(const Identifier& account);
  const AccountChain* find(const Identifier& account) const;
  bool holds(const Identifier& account) const { return chains_.contains(account); }
  bool drop(const Identifier& account) { return chains_.erase(account) > 0; }
  const std::map<Identifier, AccountChain>& chains() const noexcept { return chains_; }

private:
  const Genesis* genesis_;
  std::map<Identifier, AccountChain> chains_;
};

/// Range of heights to request after learning of a longer chain.
struct GapRequest {
  std::uint64_t from = 0;
  std::uint64_t to = 0;
};

std::optional<GapRequest> plan_gap_fill(const AccountChain& chain, std::uint64_t announced_height);

/// Appends every block of a fetched range that extends the chain; returns how
/// many were appended. Stops at the first block that does not fit.
std::size_t apply_blocks(AccountChain& chain, std::span<const Block> blocks);

// Replication of stored chains toward the k closest nodes.

struct ReplicationConfig {
  /// Replications performed after falling out of the k closest.
  unsigned remaining_replications = 3;
  /// Drop delay after the last of those, in replication periods.
  unsigned drop_periods = 10;
};

struct ReplicationState {
  unsigned remaining = 3;
  bool drop_pending = false;
};

enum class ReplicationAction { replicate_and_reschedule, replicate_and_decrement, start_drop_timer, idle };

const char* to_string(ReplicationAction action) noexcept;

/// One tick of a node's replication timer for a stored chain.
ReplicationAction replication_tick(ReplicationState& state, const Identifier& self,
                                   std::span<const Identifier> current_closest,
                                   const ReplicationConfig& config);

// Cross-account partial order.

class DagInconsistency : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class TransactionDag {
public:
  std::size_t size() const noexcept { return blocks_.size(); }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  /// Dependence arcs of vertex i: indices of its parent blocks.
  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  std::optional<std::size_t> index_of(const Digest& block_hash) const;

  /// A topological order (parents first), or nullopt if a cycle exists.
  std::optional<std::vector<std::size_t>> topological_order() const;
  bool acyclic() const { return topological_order().has_value(); }
  /// True if b depends transitively on a.
  bool happens_before(std::size_t a, std::size_t b) const;
  /// Blocks touching account, in DAG order.
  std::vector<Block> project(const Identifier& account) const;

private:
  friend TransactionDag build_dag(std::span<const AccountChain> chains);

  std::vector<Block> blocks_;
  std::vector<std::vector<std::size_t>> parents_;
  std::map<Digest, std::size_t> index_;
};

/// Merges per-account chains into one DAG with each transaction once. Throws
/// DagInconsistency when the same (sender, nonce) appears with different
/// content.
TransactionDag build_dag(std::span<const AccountChain> chains);

// JSON-lines chain interchange: one block per line, fields in canonical order.

std::string export_chain_jsonl(const AccountChain& chain, const IdSpace& space);
void export_chain_jsonl(const AccountChain& chain, const IdSpace& space, std::ostream& out);
/// Rebuilds a chain, checking every hash and parent link. Throws
/// std::invalid_argument with the offending line number on failure.
AccountChain import_chain_jsonl(std::istream& in, const Identifier& account, Amount initial_grant,
                                const IdSpace& space);

}  // namespace scalegraph::ledger
