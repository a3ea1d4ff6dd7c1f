#include "scalegraph/ledger.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "scalegraph/ledger_json.hpp"

namespace scalegraph::ledger {

Digest Transaction::signing_digest() const {
  return CanonicalWriter().text("scalegraph/tx").id(sender).id(receiver).i64(amount).u64(nonce).finish();
}

Transaction make_transaction(const Identifier& sender, const Identifier& receiver, Amount amount,
                             std::uint64_t nonce, const Signer& sender_key) {
  Transaction tx{sender, receiver, amount, nonce, {}};
  tx.signature = sender_key.sign(tx.signing_digest());
  return tx;
}

Digest SignedVote::signing_digest(Kind kind, const Digest& block_hash, std::uint64_t view) {
  return CanonicalWriter()
      .text(kind == Kind::vote ? "scalegraph/vote" : "scalegraph/commit")
      .digest(block_hash)
      .u64(view)
      .finish();
}

Digest SignedVote::signing_digest() const { return signing_digest(kind, block_hash, view); }

Digest Block::compute_hash() const {
  CanonicalWriter w;
  w.text("scalegraph/block");
  w.id(tx.sender).id(tx.receiver).i64(tx.amount).u64(tx.nonce).id(tx.signature.signer).digest(tx.signature.tag);
  w.u64(sender_validators.size());
  for (const auto& v : sender_validators) w.id(v);
  w.u64(receiver_validators.size());
  for (const auto& v : receiver_validators) w.id(v);
  w.digest(sender_parent.hash).u64(sender_parent.height);
  w.digest(receiver_parent.hash).u64(receiver_parent.height);
  if (prev_votes) {
    w.u64(1).u64(prev_votes->size());
    for (const auto& vote : *prev_votes) {
      w.u64(static_cast<std::uint64_t>(vote.kind)).id(vote.voter).digest(vote.block_hash).u64(vote.view);
      w.id(vote.signature.signer).digest(vote.signature.tag);
    }
  } else {
    w.u64(0);
  }
  return w.finish();
}

const ChainRef& Block::parent_for(const Identifier& account) const {
  if (account == tx.sender) return sender_parent;
  if (account == tx.receiver) return receiver_parent;
  throw std::invalid_argument("block does not involve account");
}

std::vector<Identifier> Block::validators() const {
  std::vector<Identifier> out = sender_validators;
  for (const auto& v : receiver_validators) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

const char* to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::accept: return "accept";
    case Verdict::bad_signature: return "bad-signature";
    case Verdict::insufficient_balance: return "insufficient-balance";
    case Verdict::replay: return "replay";
    case Verdict::malformed: return "malformed";
  }
  return "unknown";
}

const char* to_string(AppendResult result) noexcept {
  switch (result) {
    case AppendResult::appended: return "appended";
    case AppendResult::parent_mismatch: return "parent-mismatch";
    case AppendResult::not_involved: return "not-involved";
    case AppendResult::bad_hash: return "bad-hash";
  }
  return "unknown";
}

AccountChain::AccountChain(Identifier account, Amount initial_grant)
    : account_(account), initial_grant_(initial_grant), balance_(initial_grant),
      min_prefix_balance_(initial_grant) {}

ChainRef AccountChain::tip() const {
  if (blocks_.empty()) return ChainRef::genesis();
  return {blocks_.back().hash, blocks_.size()};
}

const Block* AccountChain::at(std::uint64_t height) const {
  if (height == 0 || height > blocks_.size()) return nullptr;
  return &blocks_[height - 1];
}

bool AccountChain::contains(const Digest& block_hash) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const Block& b) { return b.hash == block_hash; });
}

AppendResult AccountChain::append(const Block& block) {
  if (!block.involves(account_)) return AppendResult::not_involved;
  if (!block.hash_valid()) return AppendResult::bad_hash;
  if (block.parent_for(account_) != tip()) return AppendResult::parent_mismatch;
  blocks_.push_back(block);
  if (block.tx.sender == account_) {
    balance_ -= block.tx.amount;
    last_nonce_ = std::max(last_nonce_.value_or(0), block.tx.nonce);
  } else {
    balance_ += block.tx.amount;
  }
  min_prefix_balance_ = std::min(min_prefix_balance_, balance_);
  return AppendResult::appended;
}

std::vector<Block> AccountChain::get_blocks(std::uint64_t from, std::uint64_t to) const {
  std::vector<Block> out;
  if (from == 0 || from > to || from > blocks_.size()) return out;
  to = std::min<std::uint64_t>(to, blocks_.size());
  out.assign(blocks_.begin() + static_cast<std::ptrdiff_t>(from - 1), blocks_.begin() + static_cast<std::ptrdiff_t>(to));
  return out;
}

ValidationResult validate_transaction(const Transaction& tx, const AccountChain& sender_chain,
                                      const Authenticator& auth) {
  if (tx.sender != sender_chain.account() || tx.sender == tx.receiver || tx.amount <= 0) {
    return {Verdict::malformed};
  }
  if (tx.signature.signer != tx.sender || !auth.verify(tx.signature, tx.signing_digest())) {
    return {Verdict::bad_signature};
  }
  if (auto last = sender_chain.last_nonce(); last && tx.nonce <= *last) return {Verdict::replay};
  if (tx.amount > sender_chain.balance()) return {Verdict::insufficient_balance};
  return {Verdict::accept};
}

Amount Genesis::grant_for(const Identifier& account) const {
  auto it = grants.find(account);
  return it == grants.end() ? default_grant : it->second;
}

AccountChain& ChainStore::ensure(const Identifier& account) {
  auto it = chains_.find(account);
  if (it == chains_.end()) {
    it = chains_.emplace(account, AccountChain(account, genesis_ ? genesis_->grant_for(account) : 0)).first;
  }
  return it->second;
}

AccountChain* ChainStore::find(const Identifier& account) {
  auto it = chains_.find(account);
  return it == chains_.end() ? nullptr : &it->second;
}

const AccountChain* ChainStore::find(const Identifier& account) const {
  auto it = chains_.find(account);
  return it == chains_.end() ? nullptr : &it->second;
}

std::optional<GapRequest> plan_gap_fill(const AccountChain& chain, std::uint64_t announced_height) {
  if (announced_height <= chain.height()) return std::nullopt;
  return GapRequest{chain.height() + 1, announced_height};
}

std::size_t apply_blocks(AccountChain& chain, std::span<const Block> blocks) {
  std::size_t appended = 0;
  for (const auto& block : blocks) {
    if (!block.involves(chain.account())) break;
    const std::uint64_t h = block.height_for(chain.account());
    if (h <= chain.height()) continue;
    if (chain.append(block) != AppendResult::appended) break;
    ++appended;
  }
  return appended;
}

const char* to_string(ReplicationAction action) noexcept {
  switch (action) {
    case ReplicationAction::replicate_and_reschedule: return "replicate-and-reschedule";
    case ReplicationAction::replicate_and_decrement: return "replicate-and-decrement";
    case ReplicationAction::start_drop_timer: return "start-drop-timer";
    case ReplicationAction::idle: return "idle";
  }
  return "unknown";
}

ReplicationAction replication_tick(ReplicationState& state, const Identifier& self,
                                   std::span<const Identifier> current_closest,
                                   const ReplicationConfig& config) {
  const bool responsible =
      std::find(current_closest.begin(), current_closest.end(), self) != current_closest.end();
  if (responsible) {
    state.remaining = config.remaining_replications;
    state.drop_pending = false;
    return ReplicationAction::replicate_and_reschedule;
  }
  if (state.drop_pending) return ReplicationAction::idle;
  if (state.remaining > 0) {
    --state.remaining;
    return ReplicationAction::replicate_and_decrement;
  }
  state.drop_pending = true;
  return ReplicationAction::start_drop_timer;
}

std::optional<std::size_t> TransactionDag::index_of(const Digest& block_hash) const {
  auto it = index_.find(block_hash);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<std::size_t>> TransactionDag::topological_order() const {
  const std::size_t n = blocks_.size();
  std::vector<std::vector<std::size_t>> children(n);
  std::vector<std::size_t> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    pending[i] = parents_[i].size();
    for (std::size_t p : parents_[i]) children[p].push_back(i);
  }
  // Ready set ordered by vertex index keeps the output deterministic.
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.push_back(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t v = *it;
    ready.erase(it);
    order.push_back(v);
    for (std::size_t c : children[v]) {
      if (--pending[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

bool TransactionDag::happens_before(std::size_t a, std::size_t b) const {
  std::vector<bool> seen(blocks_.size(), false);
  std::vector<std::size_t> stack{b};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t p : parents_[v]) {
      if (p == a) return true;
      if (!seen[p]) {
        seen[p] = true;
        stack.push_back(p);
      }
    }
  }
  return false;
}

std::vector<Block> TransactionDag::project(const Identifier& account) const {
  std::vector<Block> out;
  const auto order = topological_order();
  if (!order) return out;
  for (std::size_t i : *order) {
    if (blocks_[i].involves(account)) out.push_back(blocks_[i]);
  }
  return out;
}

TransactionDag build_dag(std::span<const AccountChain> chains) {
  TransactionDag dag;
  std::map<std::pair<Identifier, std::uint64_t>, Digest> by_sender_nonce;

  for (const auto& chain : chains) {
    for (const auto& block : chain.blocks()) {
      const auto key = std::make_pair(block.tx.sender, block.tx.nonce);
      auto [it, inserted] = by_sender_nonce.try_emplace(key, block.hash);
      if (!inserted && it->second != block.hash) {
        throw DagInconsistency("conflicting blocks for sender " + block.tx.sender.to_hex(IdSpace(256)) +
                               " with nonce " + std::to_string(block.tx.nonce));
      }
      if (dag.index_.contains(block.hash)) continue;
      dag.index_.emplace(block.hash, dag.blocks_.size());
      dag.blocks_.push_back(block);
    }
  }
  dag.parents_.resize(dag.blocks_.size());
  for (std::size_t i = 0; i < dag.blocks_.size(); ++i) {
    const Block& b = dag.blocks_[i];
    for (const ChainRef* parent : {&b.sender_parent, &b.receiver_parent}) {
      if (parent->is_genesis()) continue;
      if (auto p = dag.index_of(parent->hash)) {
        if (std::find(dag.parents_[i].begin(), dag.parents_[i].end(), *p) == dag.parents_[i].end()) {
          dag.parents_[i].push_back(*p);
        }
      }
    }
  }
  return dag;
}

namespace {

nlohmann::ordered_json ref_to_json(const ChainRef& ref) {
  nlohmann::ordered_json j;
  j["hash"] = to_hex(ref.hash);
  j["height"] = ref.height;
  return j;
}

ChainRef ref_from_json(const nlohmann::ordered_json& j) {
  return {digest_from_hex(j.at("hash").get<std::string>()), j.at("height").get<std::uint64_t>()};
}

nlohmann::ordered_json signature_to_json(const Signature& sig, const IdSpace& space) {
  nlohmann::ordered_json j;
  j["signer"] = sig.signer.to_hex(space);
  j["tag"] = to_hex(sig.tag);
  return j;
}

Signature signature_from_json(const nlohmann::ordered_json& j, const IdSpace& space) {
  return {Identifier::from_hex(j.at("signer").get<std::string>(), space),
          digest_from_hex(j.at("tag").get<std::string>())};
}

nlohmann::ordered_json ids_to_json(const std::vector<Identifier>& ids, const IdSpace& space) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& id : ids) arr.push_back(id.to_hex(space));
  return arr;
}

std::vector<Identifier> ids_from_json(const nlohmann::ordered_json& j, const IdSpace& space) {
  std::vector<Identifier> out;
  for (const auto& e : j) out.push_back(Identifier::from_hex(e.get<std::string>(), space));
  return out;
}

}  // namespace

nlohmann::ordered_json to_json(const Transaction& tx, const IdSpace& space) {
  nlohmann::ordered_json j;
  j["sender"] = tx.sender.to_hex(space);
  j["receiver"] = tx.receiver.to_hex(space);
  j["amount"] = tx.amount;
  j["nonce"] = tx.nonce;
  j["signature"] = signature_to_json(tx.signature, space);
  return j;
}

Transaction transaction_from_json(const nlohmann::ordered_json& j, const IdSpace& space) {
  Transaction tx;
  tx.sender = Identifier::from_hex(j.at("sender").get<std::string>(), space);
  tx.receiver = Identifier::from_hex(j.at("receiver").get<std::string>(), space);
  tx.amount = j.at("amount").get<Amount>();
  tx.nonce = j.at("nonce").get<std::uint64_t>();
  tx.signature = signature_from_json(j.at("signature"), space);
  return tx;
}

nlohmann::ordered_json to_json(const Block& block, const IdSpace& space) {
  nlohmann::ordered_json j;
  j["tx"] = to_json(block.tx, space);
  j["sender_validators"] = ids_to_json(block.sender_validators, space);
  j["receiver_validators"] = ids_to_json(block.receiver_validators, space);
  j["sender_parent"] = ref_to_json(block.sender_parent);
  j["receiver_parent"] = ref_to_json(block.receiver_parent);
  if (block.prev_votes) {
    auto votes = nlohmann::ordered_json::array();
    for (const auto& v : *block.prev_votes) {
      nlohmann::ordered_json vj;
      vj["kind"] = v.kind == SignedVote::Kind::vote ? "vote" : "commit";
      vj["voter"] = v.voter.to_hex(space);
      vj["block_hash"] = to_hex(v.block_hash);
      vj["view"] = v.view;
      vj["signature"] = signature_to_json(v.signature, space);
      votes.push_back(std::move(vj));
    }
    j["prev_votes"] = std::move(votes);
  } else {
    j["prev_votes"] = nullptr;
  }
  j["hash"] = to_hex(block.hash);
  return j;
}

Block block_from_json(const nlohmann::ordered_json& j, const IdSpace& space) {
  Block b;
  b.tx = transaction_from_json(j.at("tx"), space);
  b.sender_validators = ids_from_json(j.at("sender_validators"), space);
  b.receiver_validators = ids_from_json(j.at("receiver_validators"), space);
  b.sender_parent = ref_from_json(j.at("sender_parent"));
  b.receiver_parent = ref_from_json(j.at("receiver_parent"));
  if (const auto& pv = j.at("prev_votes"); !pv.is_null()) {
    std::vector<SignedVote> votes;
    for (const auto& vj : pv) {
      SignedVote v;
      v.kind = vj.at("kind").get<std::string>() == "vote" ? SignedVote::Kind::vote : SignedVote::Kind::commit;
      v.voter = Identifier::from_hex(vj.at("voter").get<std::string>(), space);
      v.block_hash = digest_from_hex(vj.at("block_hash").get<std::string>());
      v.view = vj.at("view").get<std::uint64_t>();
      v.signature = signature_from_json(vj.at("signature"), space);
      votes.push_back(v);
    }
    b.prev_votes = std::move(votes);
  }
  b.hash = digest_from_hex(j.at("hash").get<std::string>());
  return b;
}

void export_chain_jsonl(const AccountChain& chain, const IdSpace& space, std::ostream& out) {
  for (const auto& block : chain.blocks()) out << to_json(block, space).dump() << '\n';
}

std::string export_chain_jsonl(const AccountChain& chain, const IdSpace& space) {
  std::ostringstream out;
  export_chain_jsonl(chain, space, out);
  return out.str();
}

AccountChain import_chain_jsonl(std::istream& in, const Identifier& account, Amount initial_grant,
                                const IdSpace& space) {
  AccountChain chain(account, initial_grant);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Block block;
    try {
      block = block_from_json(nlohmann::ordered_json::parse(line), space);
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (const auto r = chain.append(block); r != AppendResult::appended) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + to_string(r));
    }
  }
  return chain;
}

}  // namespace scalegraph::ledger
