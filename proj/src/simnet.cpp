#include "scalegraph/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "scalegraph/random.hpp"
#include "scalegraph/routing.hpp"

namespace scalegraph::simnet {

using consensus::Message;
using consensus::Replica;
using consensus::Strategy;
using consensus::TimerId;
using consensus::TimerTag;
using nlohmann::ordered_json;

Time deliver_latency(std::mt19937_64& rng, const LatencyModel& model, bool sluggish) {
  const Time hi = std::min(model.max, model.delta);
  const Time lo = std::min(model.min, hi);
  const Time base = uniform_int(rng, lo, hi);
  return sluggish ? base + model.sluggish_extra : base;
}

namespace {

// Random stream numbers.
constexpr std::uint64_t kNodeIds = 0;
constexpr std::uint64_t kAccountIds = 1;
constexpr std::uint64_t kLatency = 2;
constexpr std::uint64_t kChurn = 3;
constexpr std::uint64_t kEntry = 4;
constexpr std::uint64_t kAuth = 5;
constexpr std::uint64_t kTables = 6;
constexpr std::uint64_t kNodeStreams = 1000;

struct Deliver {
  std::size_t from;
  std::size_t to;
  Message message;
};
struct Fire {
  std::size_t node;
  TimerId id;
  TimerTag tag;
};
struct Inject {
  std::size_t tx;
};
struct Crash {
  std::size_t node;
};
struct Join {
  std::optional<Identifier> id;
};
struct Leave {
  std::optional<NodeSelector> node;
};

using Payload = std::variant<Deliver, Fire, Inject, Crash, Join, Leave>;

}  // namespace

struct Simulator::Impl {
  class NodeEnv;

  struct Node {
    Identifier id;
    std::size_t index = 0;
    Behavior behavior = Behavior::honest;
    Strategy strategy = Strategy::honest;
    std::vector<Interval> sluggish;
    bool member = true;
    bool crashed = false;
    std::mt19937_64 rng;
    std::unique_ptr<routing::RoutingTable> table;
    std::map<std::pair<Identifier, std::size_t>, std::vector<Identifier>> lookup_cache;
    std::unique_ptr<NodeEnv> env;
    std::unique_ptr<Replica> replica;

    bool honest() const noexcept { return strategy == Strategy::honest; }
    bool is_sluggish(Time t) const {
      return std::any_of(sluggish.begin(), sluggish.end(), [t](const Interval& i) { return i.contains(t); });
    }
  };

  class NodeEnv final : public consensus::Environment {
  public:
    NodeEnv(Impl& sim, std::size_t node) : sim_(sim), node_(node) {}
    Time now() const override { return sim_.now; }
    void send(const Identifier& to, Message message) override { sim_.send(node_, to, std::move(message)); }
    TimerId schedule(Time delay, const TimerTag& tag) override { return sim_.schedule_timer(node_, delay, tag); }
    void cancel(TimerId id) override { sim_.cancelled.insert(id); }
    std::vector<Identifier> closest(const Identifier& target, std::size_t count) override {
      return sim_.resolve(node_, target, count);
    }
    std::int64_t random_between(std::int64_t lo, std::int64_t hi) override {
      return uniform_int(sim_.nodes[node_]->rng, lo, hi);
    }
    void record(const char* event, ordered_json fields) override { sim_.on_record(node_, event, std::move(fields)); }

  private:
    Impl& sim_;
    std::size_t node_;
  };

  Scenario scenario;
  std::ostream* trace;
  IdSpace space;
  Authenticator auth;
  ledger::Genesis genesis;
  std::vector<Identifier> account_ids;
  std::map<std::string, std::size_t> account_index;

  std::vector<std::unique_ptr<Node>> nodes;
  std::map<Identifier, std::size_t> node_index;
  std::optional<routing::ClosestIndex> oracle;
  std::map<std::pair<Identifier, std::size_t>, std::vector<Identifier>> oracle_cache;

  std::map<std::pair<Time, std::uint64_t>, Payload> queue;
  std::uint64_t seq = 0;
  TimerId next_timer = 1;
  std::set<TimerId> cancelled;
  Time now = 0;

  std::mt19937_64 latency_rng;
  std::mt19937_64 churn_rng;
  std::mt19937_64 entry_rng;

  std::vector<ledger::Transaction> txs;
  std::map<std::string, std::size_t> tx_by_hex;
  RunResult result;

  Impl(Scenario s, std::ostream* out)
      : scenario(std::move(s)),
        trace(out),
        space(scenario.id_bits),
        auth(derive_seed(scenario.seed, kAuth)),
        latency_rng(derive_seed(scenario.seed, kLatency)),
        churn_rng(derive_seed(scenario.seed, kChurn)),
        entry_rng(derive_seed(scenario.seed, kEntry)) {
    scenario.validate();
    scenario.protocol.space = space;
    scenario.protocol.delta = scenario.latency.delta;
    setup();
  }

  // -------------------------------------------------------------------------
  // Setup

  void setup() {
    std::vector<Identifier> ids = scenario.node_ids;
    {
      std::mt19937_64 rng(derive_seed(scenario.seed, kNodeIds));
      auto extra = random_distinct_identifiers(rng, space, scenario.node_count - ids.size(), ids);
      ids.insert(ids.end(), extra.begin(), extra.end());
    }
    {
      std::mt19937_64 rng(derive_seed(scenario.seed, kAccountIds));
      for (const auto& acc : scenario.accounts) {
        Identifier id = acc.id ? *acc.id : random_identifier(rng, space);
        account_index[acc.name] = account_ids.size();
        account_ids.push_back(id);
      }
    }
    genesis.default_grant = scenario.default_balance;
    for (std::size_t i = 0; i < scenario.accounts.size(); ++i) {
      if (scenario.accounts[i].balance) genesis.grants[account_ids[i]] = *scenario.accounts[i].balance;
    }

    emit("scenario", ordered_json{{"name", scenario.name},
                                  {"seed", scenario.seed},
                                  {"nodes", ids.size()},
                                  {"r", scenario.protocol.r},
                                  {"delta", scenario.latency.delta},
                                  {"resolver", scenario.resolver == ResolverKind::oracle ? "oracle" : "lookup"},
                                  {"deadlock_policy", consensus::to_string(scenario.protocol.deadlock_policy)},
                                  {"vote_counting", consensus::to_string(scenario.protocol.vote_counting)}});
    for (std::size_t i = 0; i < account_ids.size(); ++i) {
      emit("account", ordered_json{{"name", scenario.accounts[i].name},
                                   {"id", account_ids[i].to_hex(space)},
                                   {"balance", genesis.grant_for(account_ids[i])}});
    }

    for (const auto& id : ids) add_node(id);
    if (scenario.resolver == ResolverKind::lookup) build_tables();
    apply_faults();
    for (const auto& n : nodes) {
      ordered_json f{{"node", n->id.to_hex(space)}, {"behavior", to_string(n->behavior)}};
      if (n->behavior == Behavior::byzantine) f["strategy"] = consensus::to_string(n->strategy);
      emit("bootstrap", std::move(f));
    }
    schedule_script();
  }

  std::size_t add_node(const Identifier& id) {
    auto node = std::make_unique<Node>();
    node->id = id;
    node->index = nodes.size();
    node->rng.seed(derive_seed(scenario.seed, kNodeStreams + node->index));
    if (scenario.resolver == ResolverKind::lookup) {
      node->table = std::make_unique<routing::RoutingTable>(id, space, scenario.bucket_capacity);
    }
    node->env = std::make_unique<NodeEnv>(*this, node->index);
    node_index[id] = node->index;
    nodes.push_back(std::move(node));
    invalidate_resolver();
    return nodes.size() - 1;
  }

  void start_replica(Node& node) {
    node.replica = std::make_unique<Replica>(node.id, *node.env, auth, genesis, scenario.protocol, node.strategy);
  }

  void build_tables() {
    std::mt19937_64 rng(derive_seed(scenario.seed, kTables));
    std::vector<std::size_t> order(nodes.size());
    for (auto& n : nodes) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
      for (std::size_t i : order) {
        if (i != n->index) n->table->update(nodes[i]->id);
      }
    }
  }

  std::size_t select(const NodeSelector& sel) {
    if (sel.id) {
      auto it = node_index.find(*sel.id);
      if (it == node_index.end()) throw ScenarioError("", "no node " + sel.id->to_hex(space));
      return it->second;
    }
    const auto ranked = oracle_closest_now(account_ids.at(account_index.at(sel.closest_to)), sel.rank + 1);
    if (ranked.size() <= sel.rank) throw ScenarioError("", "rank out of range");
    return node_index.at(ranked[sel.rank]);
  }

  void apply_faults() {
    for (const auto& f : scenario.faults) {
      Node& n = *nodes[select(f.node)];
      switch (f.behavior) {
        case Behavior::honest: break;
        case Behavior::crash:
          n.behavior = Behavior::crash;
          push(f.at, Crash{n.index});
          break;
        case Behavior::sluggish:
          if (n.behavior == Behavior::honest) n.behavior = Behavior::sluggish;
          n.sluggish.insert(n.sluggish.end(), f.intervals.begin(), f.intervals.end());
          break;
        case Behavior::byzantine:
          n.behavior = Behavior::byzantine;
          n.strategy = f.strategy;
          break;
      }
    }
    for (auto& n : nodes) start_replica(*n);
  }

  void schedule_script() {
    std::map<Identifier, std::uint64_t> next_nonce;
    for (std::size_t i = 0; i < scenario.transactions.size(); ++i) {
      const auto& spec = scenario.transactions[i];
      const Identifier& from = account_ids[account_index.at(spec.from)];
      const Identifier& to = account_ids[account_index.at(spec.to)];
      const std::uint64_t nonce = spec.nonce ? *spec.nonce : ++next_nonce[from];
      if (spec.nonce) next_nonce[from] = std::max(next_nonce[from], *spec.nonce);
      txs.push_back(ledger::make_transaction(from, to, spec.amount, nonce, auth.signer_for(from)));
      const Digest id = txs.back().id();
      tx_by_hex[to_hex(id)] = i;
      TxOutcome out;
      out.label = spec.label.empty() ? std::to_string(i) : spec.label;
      out.id = id;
      out.sender = from;
      out.receiver = to;
      out.amount = spec.amount;
      out.nonce = nonce;
      out.injected = spec.at;
      result.txs.push_back(std::move(out));
      push(spec.at, Inject{i});
    }
    for (const auto& c : scenario.churn) {
      if (c.join) push(c.at, Join{c.node ? c.node->id : std::nullopt});
      else push(c.at, Leave{c.node});
    }
    if (scenario.poisson) {
      const auto& p = *scenario.poisson;
      const double delta = static_cast<double>(scenario.latency.delta);
      auto arrivals = [&](double rate, bool join) {
        if (rate <= 0) return;
        double t = 0;
        while (true) {
          t += -std::log(1.0 - uniform_unit(churn_rng)) / rate * delta;
          if (t > static_cast<double>(p.until)) break;
          if (join) push(static_cast<Time>(t), Join{});
          else push(static_cast<Time>(t), Leave{});
        }
      };
      arrivals(p.join_rate, true);
      arrivals(p.leave_rate, false);
    }
    Time last = 0;
    for (const auto& [key, _] : queue) last = std::max(last, key.first);
    if (scenario.poisson) last = std::max(last, scenario.poisson->until);
    result.horizon = scenario.horizon ? *scenario.horizon : last + 200 * scenario.latency.delta;
  }

  // -------------------------------------------------------------------------
  // Event plumbing

  void push(Time t, Payload payload) { queue.emplace(std::make_pair(t, seq++), std::move(payload)); }

  TimerId schedule_timer(std::size_t node, Time delay, const TimerTag& tag) {
    const TimerId id = next_timer++;
    push(now + std::max<Time>(delay, 0), Fire{node, id, tag});
    return id;
  }

  void emit(const char* event, ordered_json fields) {
    if (!trace) return;
    ordered_json line;
    line["t"] = now;
    line["event"] = event;
    for (auto& [k, v] : fields.items()) line[k] = std::move(v);
    *trace << line.dump() << '\n';
  }

  void on_record(std::size_t node, const char* event, ordered_json fields) {
    const Node& n = *nodes[node];
    if (n.honest() && std::string_view(event) == "commit") {
      auto it = tx_by_hex.find(fields["tx"].get<std::string>());
      if (it != tx_by_hex.end()) {
        auto& out = result.txs[it->second];
        if (!out.first_commit) out.first_commit = now;
        ++out.honest_commits;
      }
    }
    emit(event, std::move(fields));
  }

  bool alive(const Node& n) const { return n.member && !n.crashed; }

  void send(std::size_t from, const Identifier& to, Message message) {
    Node& src = *nodes[from];
    if (!alive(src)) return;
    auto it = node_index.find(to);
    if (it == node_index.end()) return;
    Node& dst = *nodes[it->second];
    ++result.messages;
    Time latency = 0;
    if (dst.index != src.index) {
      latency = deliver_latency(latency_rng, scenario.latency, src.is_sluggish(now) || dst.is_sluggish(now));
    }
    if (scenario.trace_messages) {
      emit("send", ordered_json{{"from", src.id.to_hex(space)},
                                {"to", dst.id.to_hex(space)},
                                {"msg", consensus::message_name(message)},
                                {"arrive", now + latency}});
    }
    push(now + latency, Deliver{src.index, dst.index, std::move(message)});
  }

  // -------------------------------------------------------------------------
  // Node resolution

  void invalidate_resolver() {
    oracle.reset();
    oracle_cache.clear();
    for (auto& n : nodes) n->lookup_cache.clear();
  }

  std::vector<Identifier> member_ids() const {
    std::vector<Identifier> out;
    for (const auto& n : nodes) {
      if (n->member) out.push_back(n->id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Identifier> oracle_closest_now(const Identifier& target, std::size_t count) {
    if (!oracle) oracle.emplace(member_ids(), space);
    auto [it, fresh] = oracle_cache.try_emplace({target, count});
    if (fresh) it->second = oracle->closest(target, count);
    return it->second;
  }

  std::vector<Identifier> resolve(std::size_t node, const Identifier& target, std::size_t count) {
    if (scenario.resolver == ResolverKind::oracle) return oracle_closest_now(target, count);
    Node& n = *nodes[node];
    auto [it, fresh] = n.lookup_cache.try_emplace({target, count});
    if (!fresh) return it->second;
    // Crashes are invisible to the routing layer, so crashed members still
    // answer find-node and remain eligible as validators.
    auto endpoint = [this](const Identifier& to, const Identifier& t,
                           std::size_t c) -> std::optional<std::vector<Identifier>> {
      auto peer = node_index.find(to);
      if (peer == node_index.end() || !nodes[peer->second]->member) return std::nullopt;
      return nodes[peer->second]->table->local_closest(t, c);
    };
    auto lookup = routing::iterative_find_nodes(endpoint, *n.table, target, count);
    ++result.lookups;
    result.max_lookup_rounds = std::max(result.max_lookup_rounds, lookup.rounds);
    it->second = std::move(lookup.nodes);
    return it->second;
  }

  // -------------------------------------------------------------------------
  // Event handlers

  void handle(Deliver& d) {
    Node& dst = *nodes[d.to];
    if (!alive(dst)) {
      if (scenario.trace_messages) {
        emit("drop", ordered_json{{"from", nodes[d.from]->id.to_hex(space)},
                                  {"to", dst.id.to_hex(space)},
                                  {"msg", consensus::message_name(d.message)}});
      }
      return;
    }
    if (scenario.trace_messages) {
      emit("deliver", ordered_json{{"from", nodes[d.from]->id.to_hex(space)},
                                   {"to", dst.id.to_hex(space)},
                                   {"msg", consensus::message_name(d.message)}});
    }
    dst.replica->on_message(nodes[d.from]->id, d.message);
  }

  void handle(Fire& f) {
    if (cancelled.erase(f.id)) return;
    Node& n = *nodes[f.node];
    if (alive(n)) n.replica->on_timer(f.tag);
  }

  void handle(Inject& in) {
    const auto& spec = scenario.transactions[in.tx];
    std::size_t entry = 0;
    if (spec.via) {
      entry = select(*spec.via);
    } else {
      std::vector<std::size_t> candidates;
      for (const auto& n : nodes) {
        if (alive(*n) && n->honest()) candidates.push_back(n->index);
      }
      if (candidates.empty()) return;
      entry = candidates[bounded(entry_rng, candidates.size())];
    }
    const auto& tx = txs[in.tx];
    const auto& out = result.txs[in.tx];
    emit("inject", ordered_json{{"tx", to_hex(out.id)},
                                {"label", out.label},
                                {"sender", tx.sender.to_hex(space)},
                                {"receiver", tx.receiver.to_hex(space)},
                                {"amount", tx.amount},
                                {"nonce", tx.nonce},
                                {"entry", nodes[entry]->id.to_hex(space)}});
    Node& n = *nodes[entry];
    if (alive(n)) n.replica->on_message(n.id, consensus::ClientTx{tx});
  }

  void handle(Crash& c) {
    Node& n = *nodes[c.node];
    if (n.crashed) return;
    n.crashed = true;
    n.replica->halt();
    emit("crash", ordered_json{{"node", n.id.to_hex(space)}});
  }

  void handle(Join& j) {
    Identifier id;
    if (j.id) {
      id = *j.id;
      if (auto it = node_index.find(id); it != node_index.end()) {
        if (nodes[it->second]->member) return;
        // A departed node coming back is treated as a fresh node.
        node_index.erase(it);
      }
    } else {
      std::vector<Identifier> taken;
      for (const auto& [existing, _] : node_index) taken.push_back(existing);
      id = random_distinct_identifiers(churn_rng, space, 1, taken).front();
    }
    std::vector<std::size_t> present;
    for (const auto& n : nodes) {
      if (n->member) present.push_back(n->index);
    }
    const std::size_t index = add_node(id);
    Node& n = *nodes[index];
    if (n.table && !present.empty()) {
      // Bootstrap through one member, then look up our own id; every peer
      // contacted learns about us on the way.
      const Node& boot = *nodes[present[bounded(churn_rng, present.size())]];
      n.table->update(boot.id);
      auto endpoint = [&](const Identifier& to, const Identifier& t,
                          std::size_t c) -> std::optional<std::vector<Identifier>> {
        auto peer = node_index.find(to);
        if (peer == node_index.end() || !nodes[peer->second]->member || peer->second == index) return std::nullopt;
        Node& p = *nodes[peer->second];
        p.table->update(id);
        n.table->update(p.id);
        return p.table->local_closest(t, c);
      };
      const auto found = routing::iterative_find_nodes(endpoint, *n.table, id, scenario.bucket_capacity);
      for (const auto& peer : found.nodes) {
        if (peer != id) n.table->update(peer);
      }
    }
    start_replica(n);
    invalidate_resolver();
    emit("join", ordered_json{{"node", id.to_hex(space)}});
  }

  void handle(Leave& l) {
    std::size_t index = 0;
    if (l.node) {
      if (l.node->id) {
        auto it = node_index.find(*l.node->id);
        if (it == node_index.end()) return;
        index = it->second;
      } else {
        index = select(*l.node);
      }
    } else {
      std::vector<std::size_t> candidates;
      for (const auto& n : nodes) {
        if (n->member && n->behavior == Behavior::honest) candidates.push_back(n->index);
      }
      // Never shrink the network below one r-group.
      if (candidates.size() <= scenario.protocol.r) return;
      index = candidates[bounded(churn_rng, candidates.size())];
    }
    Node& n = *nodes[index];
    if (!n.member) return;
    n.member = false;
    n.replica->halt();
    for (auto& other : nodes) {
      if (other->table) other->table->remove(n.id);
    }
    invalidate_resolver();
    emit("leave", ordered_json{{"node", n.id.to_hex(space)}});
  }

  // -------------------------------------------------------------------------

  RunResult run() {
    bool stopped = false;
    while (!queue.empty()) {
      auto it = queue.begin();
      if (it->first.first > result.horizon) {
        stopped = true;
        break;
      }
      if (const auto* fire = std::get_if<Fire>(&it->second); fire && cancelled.erase(fire->id)) {
        queue.erase(it);
        continue;
      }
      now = it->first.first;
      auto handle_node = queue.extract(it);
      ++result.events;
      std::visit([this](auto& p) { handle(p); }, handle_node.mapped());
    }
    result.end_time = now;
    const bool pending = std::any_of(result.txs.begin(), result.txs.end(),
                                     [](const TxOutcome& t) { return !t.committed(); });
    result.horizon_exceeded = stopped && pending;
    finish();
    emit("end", ordered_json{{"events", result.events},
                             {"messages", result.messages},
                             {"horizon_exceeded", result.horizon_exceeded}});
    return result;
  }

  void finish() {
    for (std::size_t a = 0; a < account_ids.size(); ++a) {
      std::uint64_t view = 0;
      for (const auto& n : nodes) {
        if (n->honest()) view = std::max(view, n->replica->view_of(account_ids[a]));
      }
      result.max_view[scenario.accounts[a].name] = view;
    }
    std::map<std::pair<Identifier, std::uint64_t>, Digest> seen;
    std::set<std::pair<Identifier, std::uint64_t>> conflicted;
    for (const auto& n : nodes) {
      if (!n->honest()) continue;
      for (const auto& [account, chain] : n->replica->chains().chains()) {
        if (chain.min_prefix_balance() < 0) {
          result.safety.overdrafts.push_back("node " + n->id.to_hex(space) + " account " + account.to_hex(space));
        }
        for (std::uint64_t h = 1; h <= chain.height(); ++h) {
          auto [it, fresh] = seen.try_emplace({account, h}, chain.at(h)->hash);
          if (!fresh && it->second != chain.at(h)->hash && conflicted.insert({account, h}).second) {
            result.safety.conflicts.push_back("(" + account.to_hex(space) + ", " + std::to_string(h) + ")");
          }
        }
      }
    }
  }
};

Simulator::Simulator(Scenario scenario, std::ostream* trace)
    : impl_(std::make_unique<Impl>(std::move(scenario), trace)) {}

Simulator::~Simulator() = default;

RunResult Simulator::run() { return impl_->run(); }

const Scenario& Simulator::scenario() const noexcept { return impl_->scenario; }

const Identifier& Simulator::account_id(const std::string& name) const {
  return impl_->account_ids.at(impl_->account_index.at(name));
}

std::vector<Identifier> Simulator::members() const { return impl_->member_ids(); }

const consensus::Replica* Simulator::replica(const Identifier& node) const {
  auto it = impl_->node_index.find(node);
  return it == impl_->node_index.end() ? nullptr : impl_->nodes[it->second]->replica.get();
}

std::vector<AssertionResult> evaluate_assertions(const Scenario& scenario, const RunResult& result) {
  std::vector<AssertionResult> out;
  const auto& a = scenario.assertions;
  auto label = [&](std::size_t i) { return result.txs.at(i).label; };

  if (a.all_committed) {
    std::vector<std::string> missing;
    for (const auto& t : result.txs) {
      if (!t.committed()) missing.push_back(t.label);
    }
    std::string detail = missing.empty() ? "all " + std::to_string(result.txs.size()) + " committed" : "uncommitted:";
    for (const auto& m : missing) detail += " " + m;
    out.push_back({"all_committed", missing.empty(), detail});
  }
  for (std::size_t i : a.committed) {
    const bool ok = result.txs.at(i).committed();
    out.push_back({"committed " + label(i), ok, ok ? "committed" : "not committed"});
  }
  for (std::size_t i : a.not_committed) {
    const bool ok = !result.txs.at(i).committed();
    out.push_back({"not_committed " + label(i), ok, ok ? "not committed" : "committed"});
  }
  if (a.no_conflicts) {
    std::string detail = std::to_string(result.safety.conflicts.size()) + " conflicting positions";
    for (const auto& c : result.safety.conflicts) detail += " " + c;
    out.push_back({"no_conflicts", result.safety.conflicts.empty(), detail});
  }
  if (a.no_overdrafts) {
    std::string detail = std::to_string(result.safety.overdrafts.size()) + " overdrawn chains";
    out.push_back({"no_overdrafts", result.safety.overdrafts.empty(), detail});
  }
  for (const auto& vc : a.view_changes) {
    const auto it = result.max_view.find(vc.account);
    const std::uint64_t v = it == result.max_view.end() ? 0 : it->second;
    bool ok = true;
    if (vc.exactly) ok = ok && v == *vc.exactly;
    if (vc.min) ok = ok && v >= *vc.min;
    if (vc.max) ok = ok && v <= *vc.max;
    out.push_back({"view_changes " + vc.account, ok, std::to_string(v) + " view changes"});
  }
  for (const auto& lc : a.latency) {
    const auto& t = result.txs.at(lc.tx);
    if (!t.committed()) {
      out.push_back({"latency " + t.label, false, "not committed"});
      continue;
    }
    const Time latency = *t.first_commit - t.injected;
    const bool ok = latency >= lc.min && latency <= lc.max;
    out.push_back({"latency " + t.label, ok,
                   std::to_string(latency) + " ticks, bounds [" + std::to_string(lc.min) + ", " +
                       std::to_string(lc.max) + "]"});
  }
  return out;
}

}  // namespace scalegraph::simnet
