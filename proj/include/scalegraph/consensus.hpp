#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "scalegraph/auth.hpp"
#include "scalegraph/ident.hpp"
#include "scalegraph/ledger.hpp"

namespace scalegraph::consensus {

using ledger::Block;
using ledger::ChainRef;
using ledger::SignedVote;
using ledger::Transaction;

/// Simulated time in integer ticks.
using Time = std::int64_t;

/// Resolves the count nodes closest to a target, distance-ascending.
using ClosestFn = std::function<std::vector<Identifier>(const Identifier& target, std::size_t count)>;

struct ValidatorGroup {
  std::vector<Identifier> r_s;
  std::vector<Identifier> r_r;
  /// r_s followed by the members of r_r not already in r_s.
  std::vector<Identifier> union_v;

  const Identifier& leader_s() const { return r_s.front(); }
  const Identifier& leader_r() const { return r_r.front(); }
  bool in_sender_group(const Identifier& node) const;
  bool in_receiver_group(const Identifier& node) const;
  bool contains(const Identifier& node) const;
};

ValidatorGroup make_group(std::vector<Identifier> r_s, std::vector<Identifier> r_r);
ValidatorGroup derive_validator_group(const Transaction& tx, const ClosestFn& closest, std::size_t r);

/// Votes needed from one r-group.
constexpr std::size_t quorum_size(std::size_t r) noexcept { return r / 2 + 1; }

enum class VoteCounting { per_group, naive };

const char* to_string(VoteCounting mode) noexcept;
std::optional<VoteCounting> parse_vote_counting(std::string_view text);

struct QuorumVerdict {
  std::size_t sender_votes = 0;
  std::size_t receiver_votes = 0;
  std::size_t total_votes = 0;
  bool quorum = false;
};

/// Per-group mode: at least quorum_size(|r_s|) distinct voters from r_s and
/// quorum_size(|r_r|) from r_r; a voter in both groups counts for both.
/// Naive mode (test only) asks for floor(|V|/2)+1 voters from V.
QuorumVerdict count_votes(std::span<const Identifier> voters, const ValidatorGroup& group,
                          VoteCounting mode = VoteCounting::per_group);

enum class LockOrder { lock_before_request, lock_after_reply };

/// Global account order used to avoid lock cycles: the smaller account of a
/// pair is always locked first.
LockOrder lock_order(const Identifier& sender, const Identifier& receiver);

enum class DeadlockPolicy { proactive, optimistic };

const char* to_string(DeadlockPolicy policy) noexcept;
std::optional<DeadlockPolicy> parse_deadlock_policy(std::string_view text);

/// Deviations available to Byzantine replicas.
enum class Strategy { honest, equivocate, vote_invalid, silent, stale_tip };

const char* to_string(Strategy strategy) noexcept;
std::optional<Strategy> parse_strategy(std::string_view text);

// Messages. The simulator authenticates the sending node; signatures are
// carried only on content that gets relayed (proposals, votes, blames).

struct QuorumCertificate {
  Digest block_hash{};
  std::uint64_t view = 0;
  std::vector<SignedVote> votes;
};

struct ProposalData {
  Block block;
  std::uint64_t view = 0;
  Identifier leader;
  Signature signature;
  /// Blame certificate that ended the previous view (view > 0 only).
  std::vector<SignedVote> view_proof;
  /// Certificate for block from an earlier view, when it is re-proposed.
  std::optional<QuorumCertificate> justify;

  static Digest signing_digest(const Digest& block_hash, std::uint64_t view);
};

struct ClientTx { Transaction tx; };
struct ForwardTx { Transaction tx; };
struct TipRequest { Transaction tx; Identifier requester; };
struct TipReply { Digest tx_id{}; Identifier receiver; ChainRef tip; };
struct TipCancel { Digest tx_id{}; Identifier receiver; };
struct LockExpired { Digest tx_id{}; Identifier receiver; };
struct Proposal { ProposalData data; };
struct ForwardProposal { ProposalData data; };
struct Vote { SignedVote vote; };
struct CertificateNotice { QuorumCertificate certificate; Block block; };
struct Commit { SignedVote commit; Block block; };
struct Blame {
  Identifier account;
  SignedVote blame;  // kind vote over blame_digest(account, view)
  /// Two conflicting proposals by the blamed leader, if that is the charge.
  std::vector<ProposalData> proof;
};
struct BlameCertificate { Identifier account; std::uint64_t view = 0; std::vector<SignedVote> blames; };
struct Status {
  Identifier account;
  std::uint64_t view = 0;
  std::optional<QuorumCertificate> certificate;
  std::vector<Block> blocks;  // certified and pending blocks at the account's next slot
};
struct GetBlocks { Identifier account; std::uint64_t from = 0; std::uint64_t to = 0; };
struct Blocks { Identifier account; std::vector<Block> blocks; std::vector<std::vector<SignedVote>> commits; };
struct TipAnnounce { Identifier account; ChainRef tip; };

using Message = std::variant<ClientTx, ForwardTx, TipRequest, TipReply, TipCancel, LockExpired, Proposal,
                             ForwardProposal, Vote, CertificateNotice, Commit, Blame, BlameCertificate, Status,
                             GetBlocks, Blocks, TipAnnounce>;

const char* message_name(const Message& message) noexcept;

/// Digest blamers sign: the account whose leader is blamed and the view.
Digest blame_digest(const Identifier& account, std::uint64_t view);

// Timers.

enum class TimerKind {
  view_sender,    // tx forwarded to an r_s member and not yet committed
  view_receiver,  // same for r_r members
  lock_expiry,    // receiver-side tip lock
  attempt,        // optimistic lock attempt at the sender leader
  retry,          // backoff before retrying an aborted attempt
  precommit,      // 2-delta wait after a certificate
  status,         // new leader collecting status
  replication,
  drop,
};

struct TimerTag {
  TimerKind kind = TimerKind::view_sender;
  Identifier account;
  Digest key{};
  std::uint64_t view = 0;
};

using TimerId = std::uint64_t;

/// What a replica may do to the outside world.
class Environment {
public:
  virtual ~Environment() = default;
  virtual Time now() const = 0;
  virtual void send(const Identifier& to, Message message) = 0;
  virtual TimerId schedule(Time delay, const TimerTag& tag) = 0;
  virtual void cancel(TimerId id) = 0;
  virtual std::vector<Identifier> closest(const Identifier& target, std::size_t count) = 0;
  /// Uniform integer in [lo, hi] from the replica's stream.
  virtual std::int64_t random_between(std::int64_t lo, std::int64_t hi) = 0;
  /// Appends a protocol event to the trace.
  virtual void record(const char* event, nlohmann::ordered_json fields) = 0;
};

struct ProtocolConfig {
  std::size_t r = 5;
  /// Used only to format identifiers in trace events.
  IdSpace space{};
  Time delta = 100000;
  /// Sender-side leader timeout after a forwarded transaction.
  Time view_timeout = 3000000;
  /// Receiver-group timeout as a multiple of view_timeout.
  std::int64_t receiver_timeout_factor = 2;
  /// Receiver tip locks and optimistic attempts expire after this many deltas.
  std::int64_t lock_expiry_deltas = 10;
  unsigned max_retries = 3;
  DeadlockPolicy deadlock_policy = DeadlockPolicy::proactive;
  VoteCounting vote_counting = VoteCounting::per_group;
  /// Embed the previous block's certificate in each block.
  bool include_prev_votes = false;
  /// Zero disables chain replication.
  Time replication_period = 0;
  ledger::ReplicationConfig replication;
};

}  // namespace scalegraph::consensus
