#include "scalegraph/replica.hpp"

#include <algorithm>

namespace scalegraph::consensus {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<Identifier> voters_of(const std::map<Identifier, SignedVote>& votes) {
  std::vector<Identifier> out;
  out.reserve(votes.size());
  for (const auto& [voter, _] : votes) out.push_back(voter);
  return out;
}

std::vector<SignedVote> values_of(const std::map<Identifier, SignedVote>& votes) {
  std::vector<SignedVote> out;
  out.reserve(votes.size());
  for (const auto& [_, v] : votes) out.push_back(v);
  return out;
}

}  // namespace

const char* to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::awaiting_lock: return "awaiting-lock";
    case Phase::awaiting_tip: return "awaiting-tip";
    case Phase::proposed: return "proposed";
    case Phase::committed: return "committed";
    case Phase::aborted: return "aborted";
  }
  return "unknown";
}

Replica::Replica(Identifier id, Environment& env, const Authenticator& auth, const ledger::Genesis& genesis,
                 const ProtocolConfig& config, Strategy strategy)
    : id_(id), env_(env), auth_(auth), signer_(auth.signer_for(id)), genesis_(genesis), config_(config),
      strategy_(strategy), chains_(&genesis) {}

std::uint64_t Replica::view_of(const Identifier& account) const {
  auto it = accounts_.find(account);
  return it == accounts_.end() ? 0 : it->second.view;
}

// ---------------------------------------------------------------------------
// Helpers

ValidatorGroup Replica::group_for(const Transaction& tx) {
  return derive_validator_group(tx, [this](const Identifier& t, std::size_t c) { return env_.closest(t, c); },
                                config_.r);
}

std::vector<Identifier> Replica::account_group(const Identifier& a) { return env_.closest(a, config_.r); }

Identifier Replica::leader_of(const Identifier& a, std::uint64_t view) {
  const auto group = account_group(a);
  return group[view % group.size()];
}

bool Replica::is_leader(const Identifier& a) { return leader_of(a, view_of(a)) == id_; }

void Replica::broadcast(const std::vector<Identifier>& to, const Message& message) {
  for (const auto& node : to) deliver_local_or_send(node, message);
}

void Replica::deliver_local_or_send(const Identifier& to, const Message& message) {
  if (strategy_ == Strategy::silent || halted_) return;
  env_.send(to, message);
}

TimerId Replica::schedule(Time delay, TimerKind kind, const Identifier& a, const Digest& key, std::uint64_t view) {
  return env_.schedule(delay, TimerTag{kind, a, key, view});
}

void Replica::cancel(std::optional<TimerId>& timer) {
  if (timer) env_.cancel(*timer);
  timer.reset();
}

SignedVote Replica::sign_vote(SignedVote::Kind kind, const Digest& hash, std::uint64_t view) const {
  SignedVote v{kind, id_, hash, view, {}};
  v.signature = signer_.sign(v.signing_digest());
  return v;
}

bool Replica::verify_vote(const SignedVote& vote, SignedVote::Kind kind) const {
  return vote.kind == kind && vote.signature.signer == vote.voter && auth_.verify(vote.signature, vote.signing_digest());
}

bool Replica::verify_proposal_signature(const ProposalData& p) const {
  return p.signature.signer == p.leader &&
         auth_.verify(p.signature, ProposalData::signing_digest(p.block.hash, p.view));
}

bool Replica::verify_certificate(const QuorumCertificate& qc, const ValidatorGroup& group) const {
  std::vector<Identifier> voters;
  for (const auto& v : qc.votes) {
    if (v.block_hash != qc.block_hash || v.view != qc.view || !verify_vote(v, SignedVote::Kind::vote)) return false;
    voters.push_back(v.voter);
  }
  return count_votes(voters, group, config_.vote_counting).quorum;
}

std::vector<Identifier> Replica::blame_audience(const Identifier& a) {
  std::set<Identifier> audience;
  for (const auto& n : account_group(a)) audience.insert(n);
  for (const auto& [_, rec] : txs_) {
    if (rec.committed || !(rec.tx.sender == a || rec.tx.receiver == a)) continue;
    audience.insert(rec.group.union_v.begin(), rec.group.union_v.end());
  }
  return {audience.begin(), audience.end()};
}

void Replica::trace(const char* event, nlohmann::ordered_json fields) {
  nlohmann::ordered_json out;
  out["node"] = id_.to_hex(config_.space);
  for (auto& [k, v] : fields.items()) out[k] = v;
  env_.record(event, std::move(out));
}

ledger::AccountChain* Replica::chain_if_member(const Identifier& a) {
  if (auto* chain = chains_.find(a)) return chain;
  const auto group = account_group(a);
  if (std::find(group.begin(), group.end(), id_) == group.end()) return nullptr;
  return &chains_.ensure(a);
}

// ---------------------------------------------------------------------------
// Dispatch

void Replica::on_message(const Identifier& from, const Message& message) {
  if (halted_ || strategy_ == Strategy::silent) return;
  std::visit(overloaded{
                 [&](const ClientTx& m) { on_client_tx(m.tx); },
                 [&](const ForwardTx& m) { on_forward_tx(m.tx); },
                 [&](const TipRequest& m) { on_tip_request(from, m); },
                 [&](const TipReply& m) { on_tip_reply(m); },
                 [&](const TipCancel& m) { on_tip_cancel(m); },
                 [&](const LockExpired& m) { on_lock_expired(m); },
                 [&](const Proposal& m) { on_proposal(from, m.data, false); },
                 [&](const ForwardProposal& m) { on_proposal(from, m.data, true); },
                 [&](const Vote& m) { on_vote(m.vote); },
                 [&](const CertificateNotice& m) { on_certificate_notice(m); },
                 [&](const Commit& m) { on_commit(from, m); },
                 [&](const Blame& m) { on_blame(m); },
                 [&](const BlameCertificate& m) { on_blame_certificate(m); },
                 [&](const Status& m) { on_status(m); },
                 [&](const GetBlocks& m) { on_get_blocks(from, m); },
                 [&](const Blocks& m) { on_blocks(m); },
                 [&](const TipAnnounce& m) { on_tip_announce(from, m); },
             },
             message);
}

void Replica::on_timer(const TimerTag& tag) {
  if (halted_ || strategy_ == Strategy::silent) return;
  switch (tag.kind) {
    case TimerKind::view_sender:
    case TimerKind::view_receiver: on_view_timer(tag); break;
    case TimerKind::lock_expiry: {
      auto& st = account(tag.account);
      if (!st.lock.holder || *st.lock.holder != tag.key) break;
      st.lock.expiry.reset();
      auto it = txs_.find(tag.key);
      const bool in_flight = it != txs_.end() && it->second.proposal_seen && !it->second.committed;
      const Time held = env_.now() - st.lock.held_since;
      if (in_flight && held < config_.view_timeout * config_.receiver_timeout_factor) {
        // A proposal already uses the granted tip; keep the slot reserved
        // for as long as a sender view change could take, but not forever.
        st.lock.expiry = schedule(config_.lock_expiry_deltas * config_.delta, TimerKind::lock_expiry, tag.account,
                                  tag.key);
        break;
      }
      const Identifier requester = st.lock.requester;
      trace("lock-expired", {{"account", tag.account.to_hex(config_.space)}, {"tx", to_hex(tag.key)}});
      release_lock(tag.account, tag.key);
      deliver_local_or_send(requester, LockExpired{tag.key, tag.account});
      break;
    }
    case TimerKind::attempt: {
      auto& st = account(tag.account);
      if (!st.instance || st.instance->tx_id != tag.key) break;
      st.instance->attempt_timer.reset();
      if (st.instance->phase == Phase::awaiting_tip || st.instance->phase == Phase::awaiting_lock) {
        abort_attempt(tag.account, "attempt-timeout");
      }
      break;
    }
    case TimerKind::retry: {
      auto& st = account(tag.account);
      if (!st.instance || st.instance->tx_id != tag.key || st.instance->phase != Phase::aborted) break;
      st.instance->retry_timer.reset();
      if (!is_leader(tag.account)) {
        st.instance.reset();
        break;
      }
      const unsigned retries = st.instance->retries;
      start_instance(tag.account, tag.key);
      if (st.instance) st.instance->retries = retries;
      break;
    }
    case TimerKind::precommit: on_precommit_timer(tag); break;
    case TimerKind::status: on_status_timer(tag.account, tag.view); break;
    case TimerKind::replication: on_replication_timer(tag.account); break;
    case TimerKind::drop: {
      const auto closest = account_group(tag.account);
      if (std::find(closest.begin(), closest.end(), id_) == closest.end()) {
        chains_.drop(tag.account);
        replication_.erase(tag.account);
        trace("chain-dropped", {{"account", tag.account.to_hex(config_.space)}});
      } else {
        replication_[tag.account] = ledger::ReplicationState{config_.replication.remaining_replications, false};
        arm_replication(tag.account);
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Transactions

void Replica::on_client_tx(const Transaction& tx) {
  if (tx.sender == tx.receiver || tx.amount <= 0 || tx.signature.signer != tx.sender ||
      !auth_.verify(tx.signature, tx.signing_digest())) {
    trace("tx-dropped", {{"tx", to_hex(tx.id())}, {"reason", "malformed"}});
    return;
  }
  const ValidatorGroup group = group_for(tx);
  trace("tx-received", {{"tx", to_hex(tx.id())}});
  broadcast(group.union_v, ForwardTx{tx});
}

Replica::TxRecord* Replica::record_tx(const Transaction& tx) {
  const Digest id = tx.id();
  if (auto it = txs_.find(id); it != txs_.end()) return &it->second;
  if (tx.sender == tx.receiver || tx.signature.signer != tx.sender ||
      !auth_.verify(tx.signature, tx.signing_digest())) {
    return nullptr;
  }
  ValidatorGroup group = group_for(tx);
  if (!group.contains(id_)) return nullptr;
  TxRecord rec;
  rec.tx = tx;
  rec.group = std::move(group);
  rec.first_seen = env_.now();
  return &txs_.emplace(id, std::move(rec)).first->second;
}

void Replica::on_forward_tx(const Transaction& tx) {
  const bool known = txs_.contains(tx.id());
  TxRecord* rec = record_tx(tx);
  if (!rec || known) return;
  arm_view_timers(*rec);
  if (is_leader(tx.sender)) {
    account(tx.sender).queue.push_back(tx.id());
    process_queue(tx.sender);
  }
}

void Replica::arm_view_timers(TxRecord& rec) {
  if (rec.committed || rec.invalid) return;
  const Digest id = rec.tx.id();
  if (rec.group.in_sender_group(id_) && !rec.sender_timer) {
    const auto* chain = chain_if_member(rec.tx.sender);
    if (chain && validate_transaction(rec.tx, *chain, auth_)) {
      rec.sender_timer = schedule(config_.view_timeout, TimerKind::view_sender, rec.tx.sender, id,
                                  view_of(rec.tx.sender));
    }
  }
  if (rec.group.in_receiver_group(id_) && !rec.receiver_timer) {
    rec.receiver_timer = schedule(config_.view_timeout * config_.receiver_timeout_factor, TimerKind::view_receiver,
                                  rec.tx.receiver, id, view_of(rec.tx.receiver));
  }
}

void Replica::process_queue(const Identifier& sender) {
  auto& st = account(sender);
  if (st.instance || st.collecting_status || !is_leader(sender)) return;
  while (!st.queue.empty()) {
    const Digest tx_id = st.queue.front();
    st.queue.pop_front();
    auto it = txs_.find(tx_id);
    if (it == txs_.end() || it->second.committed || it->second.invalid) continue;
    if (strategy_ != Strategy::vote_invalid) {
      auto* chain = chain_if_member(sender);
      const auto verdict = chain ? validate_transaction(it->second.tx, *chain, auth_).verdict
                                 : ledger::Verdict::malformed;
      if (verdict != ledger::Verdict::accept) {
        it->second.invalid = true;
        trace("tx-rejected", {{"tx", to_hex(tx_id)}, {"reason", ledger::to_string(verdict)}});
        continue;
      }
    }
    start_instance(sender, tx_id);
    return;
  }
}

void Replica::start_instance(const Identifier& sender, const Digest& tx_id) {
  auto& st = account(sender);
  const Transaction& tx = txs_.at(tx_id).tx;
  st.instance.emplace();
  st.instance->tx_id = tx_id;
  trace("instance-start", {{"tx", to_hex(tx_id)}, {"view", st.view}});

  const bool lock_first = config_.deadlock_policy == DeadlockPolicy::optimistic ||
                          lock_order(tx.sender, tx.receiver) == LockOrder::lock_before_request;
  if (!lock_first) {
    request_tip(sender);
    return;
  }
  if (try_lock_sender(sender)) request_tip(sender);
  else st.instance->phase = Phase::awaiting_lock;
}

bool Replica::try_lock_sender(const Identifier& sender) {
  auto& st = account(sender);
  auto& inst = *st.instance;
  if (st.lock.holder && *st.lock.holder != inst.tx_id) return false;
  st.lock.holder = inst.tx_id;
  st.lock.requester = id_;
  inst.sender_locked = true;
  return true;
}

void Replica::request_tip(const Identifier& sender) {
  auto& st = account(sender);
  auto& inst = *st.instance;
  const auto& rec = txs_.at(inst.tx_id);
  inst.phase = Phase::awaiting_tip;
  broadcast(rec.group.r_r, TipRequest{rec.tx, id_});
  if (config_.deadlock_policy == DeadlockPolicy::optimistic) {
    cancel(inst.attempt_timer);
    inst.attempt_timer = schedule(config_.lock_expiry_deltas * config_.delta, TimerKind::attempt, sender, inst.tx_id);
  }
}

void Replica::abort_attempt(const Identifier& sender, const char* reason) {
  auto& st = account(sender);
  auto& inst = *st.instance;
  const Digest tx_id = inst.tx_id;
  const auto& rec = txs_.at(tx_id);
  inst.phase = Phase::aborted;
  inst.receiver_tip.reset();
  cancel(inst.attempt_timer);
  broadcast(rec.group.r_r, TipCancel{tx_id, rec.tx.receiver});
  if (inst.sender_locked) {
    inst.sender_locked = false;
    release_lock(sender, tx_id);
  }
  ++inst.retries;
  trace("attempt-aborted", {{"tx", to_hex(tx_id)}, {"reason", reason}, {"retries", inst.retries}});
  if (inst.retries > config_.max_retries) {
    trace("tx-abandoned", {{"tx", to_hex(tx_id)}});
    st.instance.reset();
    process_queue(sender);
    return;
  }
  const Time backoff = env_.random_between(config_.delta, 3 * config_.delta);
  inst.retry_timer = schedule(backoff, TimerKind::retry, sender, tx_id);
}

void Replica::propose(const Identifier& sender) {
  auto& st = account(sender);
  auto& inst = *st.instance;
  const auto& rec = txs_.at(inst.tx_id);
  auto* chain = chain_if_member(sender);
  if (!chain) return;

  Block b;
  b.tx = rec.tx;
  b.sender_validators = rec.group.r_s;
  b.receiver_validators = rec.group.r_r;
  b.sender_parent = chain->tip();
  b.receiver_parent = *inst.receiver_tip;
  if (config_.include_prev_votes) {
    auto proof = commit_proofs_.find(b.sender_parent.hash);
    b.prev_votes = proof == commit_proofs_.end() ? std::vector<SignedVote>{} : proof->second;
  }
  if (strategy_ == Strategy::stale_tip) {
    if (const Block* prev = chain->at(chain->height()); prev && chain->height() > 0) {
      b.sender_parent = prev->parent_for(sender);
    } else {
      b.sender_parent = ChainRef{sha256(std::string_view("stale")), 0};
    }
  }
  b.seal();
  inst.phase = Phase::proposed;
  send_proposal(sender, b, std::nullopt);
}

void Replica::send_proposal(const Identifier& sender, const Block& block, std::optional<QuorumCertificate> justify) {
  auto& st = account(sender);
  const ValidatorGroup group = group_for(block.tx);
  auto make = [&](const Block& b) {
    ProposalData p;
    p.block = b;
    p.view = st.view;
    p.leader = id_;
    p.signature = signer_.sign(ProposalData::signing_digest(b.hash, st.view));
    p.view_proof = st.view_proof;
    p.justify = justify;
    return p;
  };
  const ProposalData p = make(block);
  trace("propose", {{"tx", to_hex(block.tx.id())}, {"block", to_hex(block.hash)}, {"view", st.view},
                    {"sender_height", block.sender_height()}, {"receiver_height", block.receiver_height()}});
  if (strategy_ != Strategy::equivocate) {
    broadcast(group.union_v, Proposal{p});
    return;
  }
  // Second block differs only in whether the previous certificate is present.
  Block twin = block;
  twin.prev_votes = block.prev_votes ? std::nullopt : std::optional<std::vector<SignedVote>>(std::vector<SignedVote>{});
  twin.seal();
  const ProposalData q = make(twin);
  trace("equivocate", {{"tx", to_hex(block.tx.id())}, {"blocks", {to_hex(block.hash), to_hex(twin.hash)}}});
  const std::size_t half = group.union_v.size() / 2;
  for (std::size_t i = 0; i < group.union_v.size(); ++i) {
    deliver_local_or_send(group.union_v[i], Proposal{i < half ? p : q});
  }
}

// ---------------------------------------------------------------------------
// Receiver-side tip locks

void Replica::on_tip_request(const Identifier& from, const TipRequest& m) {
  if (from != m.requester) return;
  TxRecord* rec = record_tx(m.tx);
  if (!rec || !rec->group.in_receiver_group(id_) || rec->committed) return;
  const Identifier receiver = m.tx.receiver;
  auto& st = account(receiver);
  st.tip_requests[m.tx.id()] = m.requester;
  if (is_leader(receiver) && !st.collecting_status) try_grant(receiver, m.tx.id());
}

void Replica::try_grant(const Identifier& receiver, const Digest& tx_id) {
  auto& st = account(receiver);
  auto req = st.tip_requests.find(tx_id);
  auto rec = txs_.find(tx_id);
  if (req == st.tip_requests.end() || rec == txs_.end() || rec->second.committed) return;
  auto* chain = chain_if_member(receiver);
  if (!chain) return;
  const Identifier requester = req->second;

  if (strategy_ == Strategy::stale_tip || strategy_ == Strategy::equivocate) {
    ChainRef tip = chain->tip();
    if (strategy_ == Strategy::stale_tip && chain->height() > 0) tip = chain->at(chain->height())->parent_for(receiver);
    deliver_local_or_send(requester, TipReply{tx_id, receiver, tip});
    return;
  }
  if (st.lock.holder && *st.lock.holder != tx_id) {
    if (std::find(st.lock.deferred.begin(), st.lock.deferred.end(), tx_id) == st.lock.deferred.end()) {
      st.lock.deferred.push_back(tx_id);
      trace("tip-deferred", {{"account", receiver.to_hex(config_.space)}, {"tx", to_hex(tx_id)}});
    }
    return;
  }
  const bool fresh = !st.lock.holder;
  st.lock.holder = tx_id;
  st.lock.requester = requester;
  if (fresh) st.lock.held_since = env_.now();
  if (fresh || !st.lock.expiry) {
    cancel(st.lock.expiry);
    st.lock.expiry = schedule(config_.lock_expiry_deltas * config_.delta, TimerKind::lock_expiry, receiver, tx_id);
  }
  trace("tip-granted", {{"account", receiver.to_hex(config_.space)}, {"tx", to_hex(tx_id)},
                        {"height", chain->height()}});
  deliver_local_or_send(requester, TipReply{tx_id, receiver, chain->tip()});
}

void Replica::release_lock(const Identifier& a, const Digest& tx_id) {
  auto& st = account(a);
  std::erase(st.lock.deferred, tx_id);
  if (!st.lock.holder || *st.lock.holder != tx_id) return;
  st.lock.holder.reset();
  cancel(st.lock.expiry);
  if (!is_leader(a) || st.collecting_status) return;

  if (st.instance && st.instance->phase == Phase::awaiting_lock) {
    if (try_lock_sender(a)) {
      if (st.instance->receiver_tip) propose(a);
      else request_tip(a);
      return;
    }
  }
  while (!st.lock.holder && !st.lock.deferred.empty()) {
    const Digest next = st.lock.deferred.front();
    st.lock.deferred.pop_front();
    try_grant(a, next);
  }
}

void Replica::on_tip_reply(const TipReply& m) {
  auto it = txs_.find(m.tx_id);
  if (it == txs_.end()) return;
  const Identifier sender = it->second.tx.sender;
  auto& st = account(sender);
  if (!st.instance || st.instance->tx_id != m.tx_id || st.instance->phase != Phase::awaiting_tip) {
    // Not waiting for this tip any more; let the receiver leader move on.
    if (!st.instance || st.instance->tx_id != m.tx_id) {
      deliver_local_or_send(leader_of(m.receiver, view_of(m.receiver)), TipCancel{m.tx_id, m.receiver});
    }
    return;
  }
  auto& inst = *st.instance;
  inst.receiver_tip = m.tip;
  cancel(inst.attempt_timer);
  if (!inst.sender_locked && !try_lock_sender(sender)) {
    inst.phase = Phase::awaiting_lock;
    return;
  }
  propose(sender);
}

void Replica::on_lock_expired(const LockExpired& m) {
  auto it = txs_.find(m.tx_id);
  if (it == txs_.end()) return;
  const Identifier sender = it->second.tx.sender;
  auto& st = account(sender);
  if (!st.instance || st.instance->tx_id != m.tx_id) return;
  if (st.instance->phase == Phase::awaiting_tip || st.instance->phase == Phase::awaiting_lock) {
    abort_attempt(sender, "lock-expired");
  }
}

void Replica::on_tip_cancel(const TipCancel& m) {
  auto& st = account(m.receiver);
  st.tip_requests.erase(m.tx_id);
  release_lock(m.receiver, m.tx_id);
}

// ---------------------------------------------------------------------------
// Proposals and votes

void Replica::on_proposal(const Identifier& from, const ProposalData& p, bool forwarded) {
  if (!verify_proposal_signature(p) || !p.block.hash_valid()) return;
  if (!forwarded && from != p.leader) return;
  TxRecord* rec = record_tx(p.block.tx);
  if (!rec) return;
  const ValidatorGroup& group = rec->group;
  if (p.block.sender_validators != group.r_s || p.block.receiver_validators != group.r_r) {
    trace("proposal-rejected", {{"block", to_hex(p.block.hash)}, {"reason", "validators"}});
    return;
  }
  const Identifier sender = p.block.tx.sender;
  if (p.view < view_of(sender)) return;
  if (p.view > view_of(sender)) {
    if (!verify_blame_certificate(sender, p.view - 1, p.view_proof)) return;
    enter_view(sender, p.view, p.view_proof);
  }
  if (p.leader != leader_of(sender, p.view)) return;

  const TallyKey key{p.block.hash, p.view};
  tallies_[key].forwards.insert(from);
  rec->proposal_seen = true;
  blocks_.emplace(p.block.hash, p.block);

  if (!forwarded_.insert(key).second) {
    check_certificate(key);
    return;
  }
  broadcast(group.union_v, ForwardProposal{p});

  if (strategy_ == Strategy::vote_invalid || strategy_ == Strategy::equivocate) {
    note_sighting(p.block, p.view, &p);
    cast_vote(p, group);
    if (strategy_ == Strategy::vote_invalid) {
      broadcast(group.union_v, Commit{sign_vote(SignedVote::Kind::commit, p.block.hash, p.view), p.block});
    }
    check_certificate(key);
    return;
  }
  const bool conflict = note_sighting(p.block, p.view, &p);
  if (!conflict) evaluate_proposal(p);
  check_certificate(key);
}

bool Replica::note_sighting(const Block& block, std::uint64_t view, const ProposalData* proposal) {
  const Identifier& sender = block.tx.sender;
  bool conflict = false;
  for (const Identifier& a : {block.tx.sender, block.tx.receiver}) {
    const SlotKey slot{a, block.height_for(a)};
    auto& seen = sightings_[slot];
    const bool fresh = std::none_of(seen.begin(), seen.end(),
                                    [&](const Sighting& s) { return s.hash == block.hash && s.view == view; });
    bool slot_conflict = false;
    for (const auto& s : seen) {
      if (s.hash == block.hash) continue;
      if (s.sender == sender && s.view < view) continue;
      slot_conflict = true;
      // Report an equivocation once, when the second block first shows up.
      if (fresh && proposal && s.sender == sender && s.view == view && s.proposal.leader == proposal->leader &&
          s.proposal.block.hash == s.hash) {
        trace("equivocation-detected", {{"account", sender.to_hex(config_.space)},
                                        {"view", view},
                                        {"blocks", {to_hex(s.hash), to_hex(block.hash)}}});
        blame(sender, view, {s.proposal, *proposal}, "equivocation");
      }
    }
    if (const auto* chain = chains_.find(a); chain && slot.height <= chain->height()) {
      if (chain->at(slot.height)->hash != block.hash) slot_conflict = true;
    }
    if (fresh) seen.push_back(Sighting{block.hash, sender, view, proposal ? *proposal : ProposalData{}});
    if (slot_conflict) {
      poison_slot(slot, block.hash);
      conflict = true;
    }
  }
  return conflict;
}

void Replica::poison_slot(const SlotKey& slot, const Digest& /*newcomer*/) {
  // Any pending pre-commit for a block in this slot is unsafe once a
  // competing block has been seen.
  for (const auto& s : sightings_[slot]) {
    for (auto it = tallies_.lower_bound({s.hash, 0}); it != tallies_.end() && it->first.first == s.hash; ++it) {
      if (!it->second.poisoned) {
        it->second.poisoned = true;
        if (it->second.precommit_timer) {
          trace("precommit-cancelled", {{"block", to_hex(s.hash)}, {"view", it->first.second}});
        }
        cancel(it->second.precommit_timer);
      }
    }
  }
}

bool Replica::lock_allows(const ProposalData& p) const {
  for (const Identifier& a : {p.block.tx.sender, p.block.tx.receiver}) {
    auto it = locks_.find(SlotKey{a, p.block.height_for(a)});
    if (it == locks_.end() || it->second.hash == p.block.hash) continue;
    return false;
  }
  return true;
}

void Replica::evaluate_proposal(const ProposalData& p) {
  const Block& b = p.block;
  const Identifier sender = b.tx.sender;
  if (committed_.contains(b.hash) || p.view != view_of(sender)) return;
  auto rec_it = txs_.find(b.tx.id());
  if (rec_it == txs_.end()) return;
  const ValidatorGroup& group = rec_it->second.group;

  // Blocks from another sender competing for one of our slots: never vote.
  for (const Identifier& a : {b.tx.sender, b.tx.receiver}) {
    for (const auto& s : sightings_[SlotKey{a, b.height_for(a)}]) {
      if (s.hash != b.hash && !(s.sender == sender && s.view < p.view)) {
        trace("vote-withheld", {{"block", to_hex(b.hash)}, {"reason", "conflict"}});
        return;
      }
    }
  }
  for (const Identifier& a : {b.tx.sender, b.tx.receiver}) {
    const bool member = a == sender ? group.in_sender_group(id_) : group.in_receiver_group(id_);
    if (!member) continue;
    auto* chain = chain_if_member(a);
    const ChainRef parent = b.parent_for(a);
    const ChainRef tip = chain->tip();
    if (parent.height > tip.height) {
      stashed_.push_back(p);
      trace("proposal-stashed", {{"block", to_hex(b.hash)}, {"account", a.to_hex(config_.space)}});
      request_gap(a, tip.height + 1, parent.height, p.leader);
      return;
    }
    if (parent != tip) {
      trace("vote-withheld", {{"block", to_hex(b.hash)}, {"reason", "stale-parent"}});
      return;
    }
  }
  if (group.in_sender_group(id_)) {
    const auto verdict = validate_transaction(b.tx, *chain_if_member(sender), auth_);
    if (!verdict) {
      trace("vote-withheld", {{"block", to_hex(b.hash)}, {"reason", ledger::to_string(verdict.verdict)}});
      return;
    }
  }
  if (!lock_allows(p)) {
    const bool justified = p.justify && p.justify->block_hash == b.hash && verify_certificate(*p.justify, group);
    bool ok = justified;
    for (const Identifier& a : {b.tx.sender, b.tx.receiver}) {
      auto it = locks_.find(SlotKey{a, b.height_for(a)});
      if (it == locks_.end() || it->second.hash == b.hash) continue;
      // An equal-view certificate means the old leader equivocated, so
      // neither block could have committed; a later view may pick either.
      const bool newer = justified && (p.justify->view > it->second.view ||
                                       (p.justify->view == it->second.view && it->second.view < p.view));
      if (!(newer && it->second.sender == sender)) ok = false;
    }
    if (!ok) {
      trace("vote-withheld", {{"block", to_hex(b.hash)}, {"reason", "locked"}});
      return;
    }
  }
  cast_vote(p, group);
}

void Replica::cast_vote(const ProposalData& p, const ValidatorGroup& group) {
  auto& tally = tallies_[{p.block.hash, p.view}];
  if (tally.voted) return;
  tally.voted = true;
  trace("vote", {{"block", to_hex(p.block.hash)}, {"view", p.view}});
  broadcast(group.union_v, Vote{sign_vote(SignedVote::Kind::vote, p.block.hash, p.view)});
}

void Replica::on_vote(const SignedVote& vote) {
  if (!verify_vote(vote, SignedVote::Kind::vote)) return;
  const TallyKey key{vote.block_hash, vote.view};
  tallies_[key].votes.emplace(vote.voter, vote);
  check_certificate(key);
}

void Replica::check_certificate(const TallyKey& key) {
  auto block_it = blocks_.find(key.first);
  if (block_it == blocks_.end()) return;
  const Block& block = block_it->second;
  auto rec_it = txs_.find(block.tx.id());
  if (rec_it == txs_.end()) return;
  const ValidatorGroup& group = rec_it->second.group;
  auto& tally = tallies_[key];

  if (!tally.certified) {
    const auto voters = voters_of(tally.votes);
    if (!count_votes(voters, group, config_.vote_counting).quorum) return;
    tally.certified = true;
    QuorumCertificate qc{key.first, key.second, values_of(tally.votes)};
    trace("certified", {{"block", to_hex(key.first)}, {"view", key.second}});
    adopt_certificate(qc, block);
    if (strategy_ != Strategy::vote_invalid) broadcast(group.union_v, CertificateNotice{qc, block});
  }
  const std::vector<Identifier> forwarders(tally.forwards.begin(), tally.forwards.end());
  if (tally.voted && !tally.poisoned && !tally.precommit_timer && !tally.precommitted &&
      view_of(block.tx.sender) == key.second && !committed_.contains(key.first) &&
      count_votes(forwarders, group, config_.vote_counting).quorum) {
    tally.precommit_timer = schedule(2 * config_.delta, TimerKind::precommit, block.tx.sender, key.first, key.second);
  }
}

void Replica::adopt_certificate(const QuorumCertificate& qc, const Block& block) {
  for (const Identifier& a : {block.tx.sender, block.tx.receiver}) {
    const SlotKey slot{a, block.height_for(a)};
    auto it = locks_.find(slot);
    if (it == locks_.end()) {
      locks_.emplace(slot, CertLock{block.hash, block.tx.sender, qc.view, qc});
    } else if (it->second.hash != block.hash && it->second.sender == block.tx.sender && qc.view > it->second.view) {
      it->second = CertLock{block.hash, block.tx.sender, qc.view, qc};
    } else if (it->second.hash == block.hash && qc.view > it->second.view) {
      it->second.view = qc.view;
      it->second.certificate = qc;
    }
  }
}

void Replica::on_certificate_notice(const CertificateNotice& m) {
  const Block& block = m.block;
  if (!block.hash_valid() || block.hash != m.certificate.block_hash) return;
  TxRecord* rec = record_tx(block.tx);
  if (!rec || !verify_certificate(m.certificate, rec->group)) return;
  blocks_.emplace(block.hash, block);
  rec->proposal_seen = true;
  const TallyKey key{block.hash, m.certificate.view};
  auto& tally = tallies_[key];
  if (!tally.certified) {
    for (const auto& v : m.certificate.votes) tally.votes.emplace(v.voter, v);
    note_sighting(block, m.certificate.view, nullptr);
  }
  check_certificate(key);
}

void Replica::on_precommit_timer(const TimerTag& tag) {
  const TallyKey key{tag.key, tag.view};
  auto& tally = tallies_[key];
  tally.precommit_timer.reset();
  if (tally.poisoned || tally.precommitted || view_of(tag.account) != tag.view) return;
  auto block_it = blocks_.find(tag.key);
  if (block_it == blocks_.end()) return;
  tally.precommitted = true;
  const auto& rec = txs_.at(block_it->second.tx.id());
  trace("precommit", {{"block", to_hex(tag.key)}, {"view", tag.view}});
  broadcast(rec.group.union_v, Commit{sign_vote(SignedVote::Kind::commit, tag.key, tag.view), block_it->second});
}

void Replica::on_commit(const Identifier& /*from*/, const Commit& m) {
  if (!verify_vote(m.commit, SignedVote::Kind::commit)) return;
  if (!m.block.hash_valid() || m.block.hash != m.commit.block_hash) return;
  TxRecord* rec = record_tx(m.block.tx);
  if (!rec || !rec->group.contains(m.commit.voter)) return;
  blocks_.emplace(m.block.hash, m.block);
  auto& ct = commit_tallies_[m.block.hash];
  ct.commits.emplace(m.commit.voter, m.commit);
  if (ct.done) return;
  if (!count_votes(voters_of(ct.commits), rec->group, config_.vote_counting).quorum) return;
  ct.done = true;
  commit_proofs_[m.block.hash] = values_of(ct.commits);
  commit_block(m.block, m.commit.voter);
}

void Replica::commit_block(const Block& block, const Identifier& source) {
  if (committed_.contains(block.hash)) return;
  for (const Identifier& a : {block.tx.sender, block.tx.receiver}) {
    auto* chain = chain_if_member(a);
    if (!chain || chain->contains(block.hash)) continue;
    const ChainRef parent = block.parent_for(a);
    if (parent.height > chain->height()) {
      pending_commits_.push_back(block);
      request_gap(a, chain->height() + 1, parent.height, source);
      return;
    }
    if (parent != chain->tip()) {
      trace("commit-conflict", {{"block", to_hex(block.hash)}, {"account", a.to_hex(config_.space)}});
      return;
    }
  }
  try_append(block);
  after_commit(block, false);
}

bool Replica::try_append(const Block& block) {
  bool any = false;
  for (const Identifier& a : {block.tx.sender, block.tx.receiver}) {
    auto* chain = chain_if_member(a);
    if (!chain || chain->contains(block.hash)) continue;
    if (chain->append(block) == ledger::AppendResult::appended) any = true;
  }
  return any;
}

void Replica::after_commit(const Block& block, bool synced) {
  if (!committed_.insert(block.hash).second) return;
  const Digest tx_id = block.tx.id();
  if (auto it = txs_.find(tx_id); it != txs_.end()) {
    it->second.committed = true;
    cancel(it->second.sender_timer);
    cancel(it->second.receiver_timer);
  }
  for (auto& [key, tally] : tallies_) {
    if (key.first == block.hash) cancel(tally.precommit_timer);
  }
  nlohmann::ordered_json fields{{"tx", to_hex(tx_id)},
                                {"block", to_hex(block.hash)},
                                {"sender", block.tx.sender.to_hex(config_.space)},
                                {"receiver", block.tx.receiver.to_hex(config_.space)},
                                {"sender_height", block.sender_height()},
                                {"receiver_height", block.receiver_height()}};
  if (synced) fields["via"] = "sync";
  trace("commit", std::move(fields));

  for (const Identifier& a : {block.tx.sender, block.tx.receiver}) {
    auto& st = account(a);
    st.tip_requests.erase(tx_id);
    release_lock(a, tx_id);
    if (chains_.holds(a)) arm_replication(a);
  }
  auto& sst = account(block.tx.sender);
  if (sst.instance && sst.instance->tx_id == tx_id) {
    cancel(sst.instance->attempt_timer);
    cancel(sst.instance->retry_timer);
    sst.instance.reset();
    process_queue(block.tx.sender);
  }
  retry_stashed();
}

void Replica::retry_stashed() {
  if (retrying_) return;
  retrying_ = true;
  bool progress = true;
  while (progress) {
    progress = false;
    auto pending = std::move(pending_commits_);
    pending_commits_.clear();
    for (const auto& block : pending) {
      if (committed_.contains(block.hash)) continue;
      const std::size_t before = committed_.size();
      commit_block(block, id_);
      if (committed_.size() > before) progress = true;
    }
    // Drop duplicates that commit_block re-queued.
    std::vector<Block> unique;
    for (auto& b : pending_commits_) {
      if (std::none_of(unique.begin(), unique.end(), [&](const Block& u) { return u.hash == b.hash; })) {
        unique.push_back(std::move(b));
      }
    }
    pending_commits_ = std::move(unique);

    auto stashed = std::move(stashed_);
    stashed_.clear();
    for (const auto& p : stashed) {
      const bool ready = [&] {
        for (const Identifier& a : {p.block.tx.sender, p.block.tx.receiver}) {
          const auto* chain = chains_.find(a);
          if (chain && p.block.parent_for(a).height > chain->height()) return false;
        }
        return true;
      }();
      if (!ready) {
        stashed_.push_back(p);
        continue;
      }
      evaluate_proposal(p);
      check_certificate({p.block.hash, p.view});
    }
  }
  retrying_ = false;
}

// ---------------------------------------------------------------------------
// View change

void Replica::blame(const Identifier& a, std::uint64_t view, std::vector<ProposalData> proof, const char* reason) {
  if (strategy_ == Strategy::vote_invalid) return;
  auto& st = account(a);
  if (view != st.view) return;
  if (st.blames[view].contains(id_) || st.blame_sent.contains(view)) return;
  const auto group = account_group(a);
  if (std::find(group.begin(), group.end(), id_) == group.end()) return;
  st.blame_sent.insert(view);
  trace("blame", {{"account", a.to_hex(config_.space)}, {"view", view}, {"reason", reason}});
  broadcast(blame_audience(a), Blame{a, sign_vote(SignedVote::Kind::vote, blame_digest(a, view), view), std::move(proof)});
}

void Replica::on_blame(const Blame& m) {
  const SignedVote& sv = m.blame;
  if (sv.block_hash != blame_digest(m.account, sv.view) || !verify_vote(sv, SignedVote::Kind::vote)) return;
  const auto group = account_group(m.account);
  if (std::find(group.begin(), group.end(), sv.voter) == group.end()) return;
  auto& st = account(m.account);
  if (sv.view < st.view) return;

  if (m.proof.size() == 2) {
    const auto& p1 = m.proof[0];
    const auto& p2 = m.proof[1];
    const bool valid = p1.view == sv.view && p2.view == sv.view && p1.leader == p2.leader &&
                       p1.block.hash != p2.block.hash && p1.block.tx.sender == m.account &&
                       p2.block.tx.sender == m.account && p1.leader == leader_of(m.account, sv.view) &&
                       verify_proposal_signature(p1) && verify_proposal_signature(p2) && p1.block.hash_valid() &&
                       p2.block.hash_valid() &&
                       p1.block.sender_parent.height == p2.block.sender_parent.height;
    if (valid) {
      for (const auto* p : {&p1, &p2}) {
        blocks_.emplace(p->block.hash, p->block);
        if (record_tx(p->block.tx)) note_sighting(p->block, p->view, p);
      }
      blame(m.account, sv.view, m.proof, "equivocation");
    }
  }

  auto& blames = st.blames[sv.view];
  blames.emplace(sv.voter, sv);
  if (sv.view != st.view || st.blame_certified.contains(sv.view)) return;
  if (blames.size() < quorum_size(group.size())) return;
  st.blame_certified.insert(sv.view);
  std::vector<SignedVote> cert = values_of(blames);
  broadcast(blame_audience(m.account), BlameCertificate{m.account, sv.view, cert});
  enter_view(m.account, sv.view + 1, cert);
}

bool Replica::verify_blame_certificate(const Identifier& a, std::uint64_t view, const std::vector<SignedVote>& blames) {
  const auto group = account_group(a);
  std::set<Identifier> voters;
  for (const auto& sv : blames) {
    if (sv.view != view || sv.block_hash != blame_digest(a, view) || !verify_vote(sv, SignedVote::Kind::vote)) {
      return false;
    }
    if (std::find(group.begin(), group.end(), sv.voter) != group.end()) voters.insert(sv.voter);
  }
  return voters.size() >= quorum_size(group.size());
}

void Replica::on_blame_certificate(const BlameCertificate& m) {
  auto& st = account(m.account);
  if (m.view < st.view || st.blame_certified.contains(m.view)) return;
  if (!verify_blame_certificate(m.account, m.view, m.blames)) return;
  st.blame_certified.insert(m.view);
  broadcast(blame_audience(m.account), m);
  enter_view(m.account, m.view + 1, m.blames);
}

void Replica::enter_view(const Identifier& a, std::uint64_t view, const std::vector<SignedVote>& proof) {
  auto& st = account(a);
  if (view <= st.view) return;
  const std::uint64_t old = st.view;
  st.view = view;
  st.view_entered = env_.now();
  st.view_proof = proof;
  const Identifier leader = leader_of(a, view);
  trace("view-change", {{"account", a.to_hex(config_.space)},
                        {"from", old},
                        {"to", view},
                        {"leader", leader.to_hex(config_.space)}});

  for (auto& [key, tally] : tallies_) {
    if (key.second >= view || !tally.precommit_timer) continue;
    auto b = blocks_.find(key.first);
    if (b != blocks_.end() && b->second.tx.sender == a) cancel(tally.precommit_timer);
  }
  if (st.instance) {
    cancel(st.instance->attempt_timer);
    cancel(st.instance->retry_timer);
    st.instance.reset();
  }
  cancel(st.lock.expiry);
  st.lock = TipLock{};
  st.queue.clear();
  st.collecting_status = false;

  for (auto& [id, rec] : txs_) {
    if (rec.committed) continue;
    if (rec.tx.sender == a) cancel(rec.sender_timer);
    if (rec.tx.receiver == a) cancel(rec.receiver_timer);
    if (rec.tx.sender == a || rec.tx.receiver == a) arm_view_timers(rec);
  }

  if (auto* chain = chain_if_member(a)) {
    const SlotKey slot{a, chain->height() + 1};
    Status status{a, view, std::nullopt, {}};
    if (auto it = locks_.find(slot); it != locks_.end()) {
      status.certificate = it->second.certificate;
      status.blocks.push_back(blocks_.at(it->second.hash));
    }
    for (const auto& s : sightings_[slot]) {
      auto b = blocks_.find(s.hash);
      if (b == blocks_.end()) continue;
      const bool listed = std::any_of(status.blocks.begin(), status.blocks.end(),
                                      [&](const Block& x) { return x.hash == s.hash; });
      if (!listed) status.blocks.push_back(b->second);
    }
    if (leader == id_) {
      st.collecting_status = true;
      st.statuses.clear();
      schedule(2 * config_.delta, TimerKind::status, a, {}, view);
    }
    deliver_local_or_send(leader, status);
  }
}

void Replica::on_status(const Status& m) {
  auto& st = account(m.account);
  if (m.view != st.view || !st.collecting_status) return;
  st.statuses.push_back(m);
  for (const auto& b : m.blocks) {
    if (b.hash_valid()) blocks_.emplace(b.hash, b);
  }
}

void Replica::on_status_timer(const Identifier& a, std::uint64_t view) {
  auto& st = account(a);
  if (st.view != view || !st.collecting_status) return;
  st.collecting_status = false;
  auto* chain = chain_if_member(a);
  if (!chain) return;
  const ChainRef tip = chain->tip();
  const std::uint64_t height = tip.height + 1;

  // Highest certificate reported for the account's next slot.
  const QuorumCertificate* best = nullptr;
  const Block* best_block = nullptr;
  auto consider = [&](const QuorumCertificate& qc) {
    auto b = blocks_.find(qc.block_hash);
    if (b == blocks_.end() || !b->second.involves(a) || b->second.height_for(a) != height) return;
    TxRecord* rec = record_tx(b->second.tx);
    if (!rec || !verify_certificate(qc, rec->group)) return;
    if (!best || qc.view > best->view) {
      best = &qc;
      best_block = &b->second;
    }
  };
  for (const auto& s : st.statuses) {
    if (s.certificate) consider(*s.certificate);
  }
  if (auto it = locks_.find(SlotKey{a, height}); it != locks_.end()) consider(it->second.certificate);

  auto take_over = [&](const Block& block, std::optional<QuorumCertificate> justify) {
    const Digest tx_id = block.tx.id();
    st.instance.emplace();
    st.instance->tx_id = tx_id;
    st.instance->phase = Phase::proposed;
    st.instance->sender_locked = true;
    st.instance->receiver_tip = block.receiver_parent;
    st.lock.holder = tx_id;
    st.lock.requester = id_;
    trace("re-propose", {{"tx", to_hex(tx_id)}, {"block", to_hex(block.hash)}, {"certified", justify.has_value()}});
    send_proposal(a, block, std::move(justify));
  };

  if (best && best_block->tx.sender == a && !committed_.contains(best_block->hash) &&
      best_block->parent_for(a) == tip) {
    const QuorumCertificate qc = *best;
    const Block block = *best_block;
    take_over(block, qc);
  } else if (best && best_block->tx.receiver == a && !committed_.contains(best_block->hash)) {
    st.lock.holder = best_block->tx.id();
    st.lock.requester = best_block->tx.sender;
  } else {
    // Uncertified pending blocks of this sender: re-propose the smallest valid one.
    std::vector<Block> candidates;
    for (const auto& s : st.statuses) {
      for (const auto& b : s.blocks) {
        if (b.tx.sender == a && b.sender_height() == height && b.sender_parent == tip && b.hash_valid()) {
          candidates.push_back(b);
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Block& x, const Block& y) { return x.hash < y.hash; });
    for (const auto& b : candidates) {
      if (committed_.contains(b.hash) || !validate_transaction(b.tx, *chain, auth_)) continue;
      TxRecord* rec = record_tx(b.tx);
      if (!rec || b.sender_validators != rec->group.r_s || b.receiver_validators != rec->group.r_r) continue;
      take_over(b, std::nullopt);
      break;
    }
  }

  std::vector<Digest> requests;
  for (const auto& [tx_id, _] : st.tip_requests) requests.push_back(tx_id);
  for (const auto& tx_id : requests) try_grant(a, tx_id);

  std::vector<std::pair<Time, Digest>> queued;
  for (const auto& [tx_id, rec] : txs_) {
    if (rec.tx.sender == a && !rec.committed && !rec.invalid) queued.emplace_back(rec.first_seen, tx_id);
  }
  std::sort(queued.begin(), queued.end());
  st.queue.clear();
  for (const auto& [_, tx_id] : queued) st.queue.push_back(tx_id);
  process_queue(a);
}

void Replica::on_view_timer(const TimerTag& tag) {
  auto it = txs_.find(tag.key);
  if (it == txs_.end()) return;
  TxRecord& rec = it->second;
  const bool sender_side = tag.kind == TimerKind::view_sender;
  (sender_side ? rec.sender_timer : rec.receiver_timer).reset();
  if (rec.committed || rec.invalid || view_of(tag.account) != tag.view) return;
  if (rec.blames_sent >= 2 * config_.r) return;
  if (sender_side) {
    const auto* chain = chain_if_member(rec.tx.sender);
    if (!chain || !validate_transaction(rec.tx, *chain, auth_)) return;
  } else if (rec.proposal_seen) {
    return;
  }
  ++rec.blames_sent;
  blame(tag.account, tag.view, {}, "timeout");
}

// ---------------------------------------------------------------------------
// Chain sync and replication

void Replica::request_gap(const Identifier& a, std::uint64_t from, std::uint64_t to, const Identifier& peer) {
  if (!gap_requests_.insert({a, to}).second) return;
  std::vector<Identifier> peers{peer};
  for (const auto& n : account_group(a)) {
    if (n != peer && n != id_) peers.push_back(n);
  }
  broadcast(peers, GetBlocks{a, from, to});
}

void Replica::on_get_blocks(const Identifier& from, const GetBlocks& m) {
  const auto* chain = chains_.find(m.account);
  if (!chain || m.from > chain->height()) return;
  Blocks reply{m.account, chain->get_blocks(m.from, m.to), {}};
  for (const auto& b : reply.blocks) {
    auto proof = commit_proofs_.find(b.hash);
    reply.commits.push_back(proof == commit_proofs_.end() ? std::vector<SignedVote>{} : proof->second);
  }
  deliver_local_or_send(from, std::move(reply));
}

void Replica::on_blocks(const Blocks& m) {
  if (m.blocks.size() != m.commits.size()) return;
  auto* chain = chain_if_member(m.account);
  if (!chain) return;
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const Block& b = m.blocks[i];
    if (!b.hash_valid() || !b.involves(m.account)) break;
    if (chain->contains(b.hash)) continue;
    if (b.parent_for(m.account) != chain->tip()) break;
    // Only blocks carrying a commit quorum are accepted from peers.
    TxRecord* rec = record_tx(b.tx);
    const ValidatorGroup group = rec ? rec->group : group_for(b.tx);
    std::vector<Identifier> committers;
    bool signatures_ok = true;
    for (const auto& sv : m.commits[i]) {
      if (sv.block_hash != b.hash || !verify_vote(sv, SignedVote::Kind::commit)) signatures_ok = false;
      committers.push_back(sv.voter);
    }
    if (!signatures_ok || !count_votes(committers, group, config_.vote_counting).quorum) break;
    blocks_.emplace(b.hash, b);
    commit_proofs_.emplace(b.hash, m.commits[i]);
    if (chain->append(b) != ledger::AppendResult::appended) break;
    if (!committed_.contains(b.hash)) {
      // The other party's chain, if held here, catches up through the same path.
      for (const Identifier& other : {b.tx.sender, b.tx.receiver}) {
        if (other == m.account) continue;
        if (auto* oc = chain_if_member(other); oc && !oc->contains(b.hash) && b.parent_for(other) == oc->tip()) {
          oc->append(b);
        }
      }
      after_commit(b, true);
    }
  }
  std::erase_if(gap_requests_, [&](const auto& g) { return g.first == m.account && g.second <= chain->height(); });
  retry_stashed();
}

void Replica::arm_replication(const Identifier& a) {
  if (config_.replication_period <= 0 || replication_timers_.contains(a)) return;
  replication_timers_[a] = schedule(config_.replication_period, TimerKind::replication, a);
}

void Replica::on_replication_timer(const Identifier& a) {
  replication_timers_.erase(a);
  const auto* chain = chains_.find(a);
  if (!chain) return;
  const auto closest = account_group(a);
  auto [it, fresh] = replication_.try_emplace(a);
  if (fresh) it->second.remaining = config_.replication.remaining_replications;
  const auto action = ledger::replication_tick(it->second, id_, closest, config_.replication);
  trace("replicate", {{"account", a.to_hex(config_.space)}, {"action", ledger::to_string(action)},
                      {"height", chain->height()}});
  switch (action) {
    case ledger::ReplicationAction::replicate_and_reschedule:
    case ledger::ReplicationAction::replicate_and_decrement:
      for (const auto& n : closest) {
        if (n != id_) deliver_local_or_send(n, TipAnnounce{a, chain->tip()});
      }
      arm_replication(a);
      break;
    case ledger::ReplicationAction::start_drop_timer:
      schedule(config_.replication_period * config_.replication.drop_periods, TimerKind::drop, a);
      break;
    case ledger::ReplicationAction::idle: break;
  }
}

void Replica::on_tip_announce(const Identifier& from, const TipAnnounce& m) {
  const auto closest = account_group(m.account);
  const bool responsible = std::find(closest.begin(), closest.end(), id_) != closest.end();
  if (!responsible && !chains_.holds(m.account)) return;
  auto& chain = chains_.ensure(m.account);
  if (m.tip.height > chain.height()) request_gap(m.account, chain.height() + 1, m.tip.height, from);
  // A fresh announcement stands in for this node's own next replication.
  if (auto t = replication_timers_.find(m.account); t != replication_timers_.end()) {
    env_.cancel(t->second);
    replication_timers_.erase(t);
  }
  arm_replication(m.account);
}

}  // namespace scalegraph::consensus
