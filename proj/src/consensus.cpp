#include "scalegraph/consensus.hpp"

#include <algorithm>
#include <stdexcept>

namespace scalegraph::consensus {

namespace {

bool member(const std::vector<Identifier>& list, const Identifier& node) {
  return std::find(list.begin(), list.end(), node) != list.end();
}

}  // namespace

bool ValidatorGroup::in_sender_group(const Identifier& node) const { return member(r_s, node); }
bool ValidatorGroup::in_receiver_group(const Identifier& node) const { return member(r_r, node); }
bool ValidatorGroup::contains(const Identifier& node) const { return member(union_v, node); }

ValidatorGroup make_group(std::vector<Identifier> r_s, std::vector<Identifier> r_r) {
  if (r_s.empty() || r_r.empty()) throw std::invalid_argument("empty r-group");
  ValidatorGroup g;
  g.union_v = r_s;
  for (const auto& n : r_r) {
    if (!member(g.union_v, n)) g.union_v.push_back(n);
  }
  g.r_s = std::move(r_s);
  g.r_r = std::move(r_r);
  return g;
}

ValidatorGroup derive_validator_group(const Transaction& tx, const ClosestFn& closest, std::size_t r) {
  return make_group(closest(tx.sender, r), closest(tx.receiver, r));
}

const char* to_string(VoteCounting mode) noexcept {
  return mode == VoteCounting::per_group ? "per-group" : "naive";
}

std::optional<VoteCounting> parse_vote_counting(std::string_view text) {
  if (text == "per-group") return VoteCounting::per_group;
  if (text == "naive") return VoteCounting::naive;
  return std::nullopt;
}

QuorumVerdict count_votes(std::span<const Identifier> voters, const ValidatorGroup& group, VoteCounting mode) {
  std::vector<Identifier> distinct(voters.begin(), voters.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  QuorumVerdict v;
  for (const auto& voter : distinct) {
    const bool s = group.in_sender_group(voter);
    const bool r = group.in_receiver_group(voter);
    v.sender_votes += s;
    v.receiver_votes += r;
    v.total_votes += s || r;
  }
  if (mode == VoteCounting::per_group) {
    v.quorum = v.sender_votes >= quorum_size(group.r_s.size()) && v.receiver_votes >= quorum_size(group.r_r.size());
  } else {
    v.quorum = v.total_votes >= group.union_v.size() / 2 + 1;
  }
  return v;
}

LockOrder lock_order(const Identifier& sender, const Identifier& receiver) {
  if (sender == receiver) throw std::invalid_argument("sender and receiver must differ");
  return sender < receiver ? LockOrder::lock_before_request : LockOrder::lock_after_reply;
}

const char* to_string(DeadlockPolicy policy) noexcept {
  return policy == DeadlockPolicy::proactive ? "proactive" : "optimistic";
}

std::optional<DeadlockPolicy> parse_deadlock_policy(std::string_view text) {
  if (text == "proactive" || text == "proactive-order") return DeadlockPolicy::proactive;
  if (text == "optimistic" || text == "optimistic-timeout") return DeadlockPolicy::optimistic;
  return std::nullopt;
}

const char* to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::honest: return "honest";
    case Strategy::equivocate: return "equivocate";
    case Strategy::vote_invalid: return "vote-invalid";
    case Strategy::silent: return "silent";
    case Strategy::stale_tip: return "stale-tip";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  for (Strategy s : {Strategy::honest, Strategy::equivocate, Strategy::vote_invalid, Strategy::silent,
                     Strategy::stale_tip}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

Digest ProposalData::signing_digest(const Digest& block_hash, std::uint64_t view) {
  return CanonicalWriter().text("scalegraph/proposal").digest(block_hash).u64(view).finish();
}

Digest blame_digest(const Identifier& account, std::uint64_t view) {
  return CanonicalWriter().text("scalegraph/blame").id(account).u64(view).finish();
}

const char* message_name(const Message& message) noexcept {
  static constexpr const char* names[] = {
      "ClientTx",   "ForwardTx",         "TipRequest", "TipReply", "TipCancel",        "LockExpired",
      "Proposal",   "ForwardProposal",   "Vote",       "CertificateNotice", "Commit", "Blame",
      "BlameCertificate", "Status",      "GetBlocks",  "Blocks",   "TipAnnounce"};
  static_assert(std::size(names) == std::variant_size_v<Message>);
  return names[message.index()];
}

}  // namespace scalegraph::consensus
