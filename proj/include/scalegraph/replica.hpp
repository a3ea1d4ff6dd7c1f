#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "scalegraph/consensus.hpp"

namespace scalegraph::consensus {

enum class Phase { awaiting_lock, awaiting_tip, proposed, committed, aborted };

const char* to_string(Phase phase) noexcept;

/// One validator node: runs every consensus instance the node takes part in
/// and stores the chains of the accounts it is responsible for.
class Replica {
public:
  Replica(Identifier id, Environment& env, const Authenticator& auth, const ledger::Genesis& genesis,
          const ProtocolConfig& config, Strategy strategy = Strategy::honest);

  const Identifier& id() const noexcept { return id_; }
  Strategy strategy() const noexcept { return strategy_; }
  const ledger::ChainStore& chains() const noexcept { return chains_; }
  std::uint64_t view_of(const Identifier& account) const;
  /// Hashes of every block this replica has committed.
  const std::set<Digest>& committed() const noexcept { return committed_; }

  void on_message(const Identifier& from, const Message& message);
  void on_timer(const TimerTag& tag);
  /// Stops all activity (used when the node leaves or crashes).
  void halt() { halted_ = true; }

private:
  struct SlotKey {
    Identifier account;
    std::uint64_t height = 0;
    auto operator<=>(const SlotKey&) const = default;
  };

  struct TxRecord {
    Transaction tx;
    ValidatorGroup group;
    Time first_seen = 0;
    bool committed = false;
    bool invalid = false;
    bool proposal_seen = false;
    std::optional<TimerId> sender_timer;
    std::optional<TimerId> receiver_timer;
    unsigned blames_sent = 0;
  };

  struct Instance {
    Digest tx_id{};
    Phase phase = Phase::awaiting_lock;
    bool sender_locked = false;
    std::optional<ChainRef> receiver_tip;
    unsigned retries = 0;
    std::optional<TimerId> attempt_timer;
    std::optional<TimerId> retry_timer;
  };

  struct TipLock {
    std::optional<Digest> holder;
    Identifier requester;
    std::optional<TimerId> expiry;
    Time held_since = 0;
    std::deque<Digest> deferred;
  };

  struct AccountState {
    std::uint64_t view = 0;
    Time view_entered = 0;
    std::deque<Digest> queue;
    std::optional<Instance> instance;
    TipLock lock;
    /// Tip requests for this account as receiver, by tx, with requester.
    std::map<Digest, Identifier> tip_requests;
    std::map<std::uint64_t, std::map<Identifier, SignedVote>> blames;
    std::set<std::uint64_t> blame_certified;
    /// Views this node has already blamed; its own Blame arrives asynchronously.
    std::set<std::uint64_t> blame_sent;
    std::vector<SignedVote> view_proof;
    bool collecting_status = false;
    std::vector<Status> statuses;
  };

  struct Sighting {
    Digest hash{};
    Identifier sender;
    std::uint64_t view = 0;
    ProposalData proposal;
  };

  struct CertLock {
    Digest hash{};
    Identifier sender;
    std::uint64_t view = 0;
    QuorumCertificate certificate;
  };

  struct Tally {
    std::map<Identifier, SignedVote> votes;
    std::set<Identifier> forwards;
    bool voted = false;
    bool certified = false;
    bool poisoned = false;
    bool precommitted = false;
    std::optional<TimerId> precommit_timer;
  };

  struct CommitTally {
    std::map<Identifier, SignedVote> commits;
    bool done = false;
  };

  using TallyKey = std::pair<Digest, std::uint64_t>;

  // Helpers.
  bool acts_honestly() const noexcept { return strategy_ == Strategy::honest; }
  ValidatorGroup group_for(const Transaction& tx);
  std::vector<Identifier> account_group(const Identifier& account);
  Identifier leader_of(const Identifier& account, std::uint64_t view);
  bool is_leader(const Identifier& account);
  AccountState& account(const Identifier& a) { return accounts_[a]; }
  void broadcast(const std::vector<Identifier>& to, const Message& message);
  void deliver_local_or_send(const Identifier& to, const Message& message);
  TimerId schedule(Time delay, TimerKind kind, const Identifier& account, const Digest& key = {},
                   std::uint64_t view = 0);
  void cancel(std::optional<TimerId>& timer);
  SignedVote sign_vote(SignedVote::Kind kind, const Digest& hash, std::uint64_t view) const;
  bool verify_vote(const SignedVote& vote, SignedVote::Kind kind) const;
  bool verify_proposal_signature(const ProposalData& p) const;
  bool verify_certificate(const QuorumCertificate& qc, const ValidatorGroup& group) const;
  std::vector<Identifier> blame_audience(const Identifier& account);
  void trace(const char* event, nlohmann::ordered_json fields);
  ledger::AccountChain* chain_if_member(const Identifier& account);

  // Transactions.
  void on_client_tx(const Transaction& tx);
  void on_forward_tx(const Transaction& tx);
  TxRecord* record_tx(const Transaction& tx);
  void arm_view_timers(TxRecord& rec);
  void process_queue(const Identifier& sender);
  void start_instance(const Identifier& sender, const Digest& tx_id);
  void request_tip(const Identifier& sender);
  bool try_lock_sender(const Identifier& sender);
  void abort_attempt(const Identifier& sender, const char* reason);
  void propose(const Identifier& sender);
  void send_proposal(const Identifier& sender, const Block& block, std::optional<QuorumCertificate> justify);

  // Receiver-side tip locks.
  void on_tip_request(const Identifier& from, const TipRequest& m);
  void try_grant(const Identifier& receiver, const Digest& tx_id);
  void release_lock(const Identifier& account, const Digest& tx_id);
  void on_tip_reply(const TipReply& m);
  void on_lock_expired(const LockExpired& m);
  void on_tip_cancel(const TipCancel& m);

  // Voting.
  void on_proposal(const Identifier& from, const ProposalData& p, bool forwarded);
  void evaluate_proposal(const ProposalData& p);
  bool note_sighting(const Block& block, std::uint64_t view, const ProposalData* proposal);
  void poison_slot(const SlotKey& slot, const Digest& keep);
  bool lock_allows(const ProposalData& p) const;
  void cast_vote(const ProposalData& p, const ValidatorGroup& group);
  void on_vote(const SignedVote& vote);
  void check_certificate(const TallyKey& key);
  void adopt_certificate(const QuorumCertificate& qc, const Block& block);
  void on_certificate_notice(const CertificateNotice& m);
  void on_precommit_timer(const TimerTag& tag);
  void on_commit(const Identifier& from, const Commit& m);
  void commit_block(const Block& block, const Identifier& source);
  bool try_append(const Block& block);
  void after_commit(const Block& block, bool synced);
  void retry_stashed();

  // View change.
  void blame(const Identifier& account, std::uint64_t view, std::vector<ProposalData> proof, const char* reason);
  void on_blame(const Blame& m);
  void on_blame_certificate(const BlameCertificate& m);
  bool verify_blame_certificate(const Identifier& account, std::uint64_t view,
                                const std::vector<SignedVote>& blames);
  void enter_view(const Identifier& account, std::uint64_t view, const std::vector<SignedVote>& proof);
  void on_status(const Status& m);
  void on_status_timer(const Identifier& account, std::uint64_t view);
  void on_view_timer(const TimerTag& tag);

  // Chain sync and replication.
  void on_get_blocks(const Identifier& from, const GetBlocks& m);
  void on_blocks(const Blocks& m);
  void request_gap(const Identifier& account, std::uint64_t from, std::uint64_t to, const Identifier& peer);
  void on_tip_announce(const Identifier& from, const TipAnnounce& m);
  void arm_replication(const Identifier& account);
  void on_replication_timer(const Identifier& account);

  Identifier id_;
  Environment& env_;
  const Authenticator& auth_;
  Signer signer_;
  const ledger::Genesis& genesis_;
  ProtocolConfig config_;
  Strategy strategy_;
  bool halted_ = false;

  ledger::ChainStore chains_;
  std::map<Digest, TxRecord> txs_;
  std::map<Identifier, AccountState> accounts_;
  std::map<SlotKey, std::vector<Sighting>> sightings_;
  std::map<SlotKey, CertLock> locks_;
  std::map<Digest, Block> blocks_;
  std::set<std::pair<Digest, std::uint64_t>> forwarded_;
  std::map<TallyKey, Tally> tallies_;
  std::map<Digest, CommitTally> commit_tallies_;
  std::map<Digest, std::vector<SignedVote>> commit_proofs_;
  std::set<Digest> committed_;
  std::vector<ProposalData> stashed_;
  std::vector<Block> pending_commits_;
  bool retrying_ = false;
  std::set<std::pair<Identifier, std::uint64_t>> gap_requests_;
  std::map<Identifier, ledger::ReplicationState> replication_;
  std::map<Identifier, TimerId> replication_timers_;
};

}  // namespace scalegraph::consensus
