#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "scalegraph/simnet.hpp"

namespace scalegraph::simnet {

using nlohmann::json;

namespace {

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

class Reader {
public:
  explicit Reader(const Scenario& partial) : s_(partial) {}

  void expect_object(const json& j, const std::string& where) const {
    if (!j.is_object()) throw ScenarioError(where, "expected an object");
  }

  void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) const {
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw ScenarioError(join_path(where, key), "unknown field");
    }
  }

  std::uint64_t uint(const json& j, const std::string& where) const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      throw ScenarioError(where, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
  }

  std::int64_t integer(const json& j, const std::string& where) const {
    if (!j.is_number_integer()) throw ScenarioError(where, "expected an integer");
    return j.get<std::int64_t>();
  }

  double number(const json& j, const std::string& where) const {
    if (!j.is_number()) throw ScenarioError(where, "expected a number");
    return j.get<double>();
  }

  bool boolean(const json& j, const std::string& where) const {
    if (!j.is_boolean()) throw ScenarioError(where, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const json& j, const std::string& where) const {
    if (!j.is_string()) throw ScenarioError(where, "expected a string");
    return j.get<std::string>();
  }

  /// Ticks, either as an integer or as a string such as "2.5delta".
  Time time(const json& j, const std::string& where) const {
    if (j.is_number_integer()) {
      const auto t = j.get<std::int64_t>();
      if (t < 0) throw ScenarioError(where, "time must not be negative");
      return t;
    }
    if (j.is_string()) {
      const std::string text = j.get<std::string>();
      constexpr std::string_view suffix = "delta";
      if (text.size() > suffix.size() && text.ends_with(suffix)) {
        const std::string head = text.substr(0, text.size() - suffix.size());
        double k = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), k);
        if (ec == std::errc() && ptr == head.data() + head.size() && k >= 0) {
          return static_cast<Time>(k * static_cast<double>(s_.latency.delta) + 0.5);
        }
      }
    }
    throw ScenarioError(where, "expected ticks or a string like \"2delta\"");
  }

  Identifier identifier(const json& j, const std::string& where) const {
    const std::string text = string(j, where);
    try {
      return Identifier::from_hex(text, IdSpace(s_.id_bits));
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(where, e.what());
    }
  }

  NodeSelector selector(const json& j, const std::string& where) const {
    NodeSelector sel;
    if (j.is_string()) {
      sel.id = identifier(j, where);
      return sel;
    }
    expect_object(j, where);
    only_keys(j, where, {"id", "closest_to", "rank"});
    if (j.contains("id")) sel.id = identifier(j["id"], join_path(where, "id"));
    if (j.contains("closest_to")) sel.closest_to = string(j["closest_to"], join_path(where, "closest_to"));
    if (j.contains("rank")) sel.rank = uint(j["rank"], join_path(where, "rank"));
    if (sel.id.has_value() == !sel.closest_to.empty()) {
      throw ScenarioError(where, "give exactly one of id or closest_to");
    }
    return sel;
  }

private:
  const Scenario& s_;
};

std::size_t tx_ref(const Scenario& s, const json& j, const std::string& where) {
  try {
    if (j.is_number_unsigned()) return s.tx_index(std::to_string(j.get<std::uint64_t>()));
    if (j.is_string()) return s.tx_index(j.get<std::string>());
  } catch (const ScenarioError& e) {
    throw ScenarioError(where, e.what());
  }
  throw ScenarioError(where, "expected a transaction index or label");
}

void parse_protocol(const Reader& rd, const json& j, const std::string& where, Scenario& s) {
  rd.expect_object(j, where);
  rd.only_keys(j, where,
               {"deadlock_policy", "vote_counting", "view_timeout", "receiver_timeout_factor", "lock_expiry_deltas",
                "max_retries", "include_prev_votes", "replication_period", "remaining_replications",
                "drop_periods"});
  auto& p = s.protocol;
  if (j.contains("deadlock_policy")) {
    const auto w = join_path(where, "deadlock_policy");
    auto v = consensus::parse_deadlock_policy(rd.string(j["deadlock_policy"], w));
    if (!v) throw ScenarioError(w, "expected proactive or optimistic");
    p.deadlock_policy = *v;
  }
  if (j.contains("vote_counting")) {
    const auto w = join_path(where, "vote_counting");
    auto v = consensus::parse_vote_counting(rd.string(j["vote_counting"], w));
    if (!v) throw ScenarioError(w, "expected per-group or naive");
    p.vote_counting = *v;
  }
  if (j.contains("view_timeout")) p.view_timeout = rd.time(j["view_timeout"], join_path(where, "view_timeout"));
  if (j.contains("receiver_timeout_factor")) {
    p.receiver_timeout_factor =
        static_cast<std::int64_t>(rd.uint(j["receiver_timeout_factor"], join_path(where, "receiver_timeout_factor")));
  }
  if (j.contains("lock_expiry_deltas")) {
    p.lock_expiry_deltas =
        static_cast<std::int64_t>(rd.uint(j["lock_expiry_deltas"], join_path(where, "lock_expiry_deltas")));
  }
  if (j.contains("max_retries")) {
    p.max_retries = static_cast<unsigned>(rd.uint(j["max_retries"], join_path(where, "max_retries")));
  }
  if (j.contains("include_prev_votes")) {
    p.include_prev_votes = rd.boolean(j["include_prev_votes"], join_path(where, "include_prev_votes"));
  }
  if (j.contains("replication_period")) {
    p.replication_period = rd.time(j["replication_period"], join_path(where, "replication_period"));
  }
  if (j.contains("remaining_replications")) {
    p.replication.remaining_replications =
        static_cast<unsigned>(rd.uint(j["remaining_replications"], join_path(where, "remaining_replications")));
  }
  if (j.contains("drop_periods")) {
    p.replication.drop_periods = static_cast<unsigned>(rd.uint(j["drop_periods"], join_path(where, "drop_periods")));
  }
}

void parse_assertions(const Reader& rd, const json& j, const std::string& where, Scenario& s) {
  rd.expect_object(j, where);
  rd.only_keys(j, where,
               {"all_committed", "committed", "not_committed", "no_conflicts", "no_overdrafts", "view_changes",
                "latency"});
  auto& a = s.assertions;
  if (j.contains("all_committed")) a.all_committed = rd.boolean(j["all_committed"], join_path(where, "all_committed"));
  if (j.contains("no_conflicts")) a.no_conflicts = rd.boolean(j["no_conflicts"], join_path(where, "no_conflicts"));
  if (j.contains("no_overdrafts")) a.no_overdrafts = rd.boolean(j["no_overdrafts"], join_path(where, "no_overdrafts"));
  for (const char* key : {"committed", "not_committed"}) {
    if (!j.contains(key)) continue;
    const auto w = join_path(where, key);
    if (!j[key].is_array()) throw ScenarioError(w, "expected an array");
    auto& out = std::string_view(key) == "committed" ? a.committed : a.not_committed;
    for (std::size_t i = 0; i < j[key].size(); ++i) out.push_back(tx_ref(s, j[key][i], index_path(w, i)));
  }
  if (j.contains("view_changes")) {
    const auto w = join_path(where, "view_changes");
    if (!j["view_changes"].is_array()) throw ScenarioError(w, "expected an array");
    for (std::size_t i = 0; i < j["view_changes"].size(); ++i) {
      const auto& e = j["view_changes"][i];
      const auto wi = index_path(w, i);
      rd.expect_object(e, wi);
      rd.only_keys(e, wi, {"account", "exactly", "min", "max"});
      if (!e.contains("account")) throw ScenarioError(wi, "missing account");
      ViewChangeCheck c;
      c.account = rd.string(e["account"], join_path(wi, "account"));
      if (e.contains("exactly")) c.exactly = rd.uint(e["exactly"], join_path(wi, "exactly"));
      if (e.contains("min")) c.min = rd.uint(e["min"], join_path(wi, "min"));
      if (e.contains("max")) c.max = rd.uint(e["max"], join_path(wi, "max"));
      a.view_changes.push_back(std::move(c));
    }
  }
  if (j.contains("latency")) {
    const auto w = join_path(where, "latency");
    if (!j["latency"].is_array()) throw ScenarioError(w, "expected an array");
    for (std::size_t i = 0; i < j["latency"].size(); ++i) {
      const auto& e = j["latency"][i];
      const auto wi = index_path(w, i);
      rd.expect_object(e, wi);
      rd.only_keys(e, wi, {"tx", "min", "max"});
      for (const char* k : {"tx", "min", "max"}) {
        if (!e.contains(k)) throw ScenarioError(join_path(wi, k), "missing");
      }
      a.latency.push_back(LatencyCheck{tx_ref(s, e["tx"], join_path(wi, "tx")),
                                       rd.time(e["min"], join_path(wi, "min")),
                                       rd.time(e["max"], join_path(wi, "max"))});
    }
  }
}

}  // namespace

const char* to_string(Behavior behavior) noexcept {
  switch (behavior) {
    case Behavior::honest: return "honest";
    case Behavior::crash: return "crash";
    case Behavior::sluggish: return "sluggish";
    case Behavior::byzantine: return "byzantine";
  }
  return "unknown";
}

std::size_t Scenario::tx_index(const std::string& label_or_index) const {
  for (std::size_t i = 0; i < transactions.size(); ++i) {
    if (!transactions[i].label.empty() && transactions[i].label == label_or_index) return i;
  }
  std::size_t index = 0;
  const auto [ptr, ec] =
      std::from_chars(label_or_index.data(), label_or_index.data() + label_or_index.size(), index);
  if (ec == std::errc() && ptr == label_or_index.data() + label_or_index.size() && index < transactions.size()) {
    return index;
  }
  throw ScenarioError("", "no transaction \"" + label_or_index + "\"");
}

void Scenario::validate() const {
  const std::size_t total = std::max(node_count, node_ids.size());
  if (total == 0) throw ScenarioError("nodes", "at least one node is required");
  if (protocol.r == 0) throw ScenarioError("r", "must be at least 1");
  if (protocol.r > total) throw ScenarioError("r", "exceeds the number of nodes");
  if (id_bits == 0 || id_bits > 256) throw ScenarioError("id_bits", "must be in [1, 256]");
  if (latency.delta <= 0) throw ScenarioError("delta", "must be positive");
  if (latency.min < 0 || latency.min > latency.max) throw ScenarioError("latency", "need 0 <= min <= max");
  if (latency.max > latency.delta) throw ScenarioError("latency.max", "prompt latency must not exceed delta");
  if (protocol.view_timeout <= 0) throw ScenarioError("protocol.view_timeout", "must be positive");

  std::set<Identifier> ids(node_ids.begin(), node_ids.end());
  if (ids.size() != node_ids.size()) throw ScenarioError("nodes.ids", "duplicate node id");

  std::set<std::string> names;
  for (const auto& acc : accounts) {
    if (!names.insert(acc.name).second) throw ScenarioError("accounts." + acc.name, "duplicate account");
    if (acc.balance && *acc.balance < 0) throw ScenarioError("accounts." + acc.name + ".balance", "negative");
  }
  auto check_selector = [&](const NodeSelector& sel, const std::string& where) {
    if (!sel.closest_to.empty() && !names.contains(sel.closest_to)) {
      throw ScenarioError(where + ".closest_to", "unknown account \"" + sel.closest_to + "\"");
    }
    if (!sel.closest_to.empty() && sel.rank >= total) throw ScenarioError(where + ".rank", "rank out of range");
  };
  for (std::size_t i = 0; i < faults.size(); ++i) {
    check_selector(faults[i].node, index_path("faults", i) + ".node");
  }
  for (std::size_t i = 0; i < transactions.size(); ++i) {
    const auto& tx = transactions[i];
    const auto where = index_path("transactions", i);
    if (!names.contains(tx.from)) throw ScenarioError(where + ".from", "unknown account \"" + tx.from + "\"");
    if (!names.contains(tx.to)) throw ScenarioError(where + ".to", "unknown account \"" + tx.to + "\"");
    if (tx.from == tx.to) throw ScenarioError(where, "sender and receiver must differ");
    if (tx.amount <= 0) throw ScenarioError(where + ".amount", "must be positive");
    if (tx.via) check_selector(*tx.via, where + ".via");
  }
  for (std::size_t i = 0; i < churn.size(); ++i) {
    if (churn[i].node) check_selector(*churn[i].node, index_path("churn.events", i) + ".node");
  }
  for (const auto& vc : assertions.view_changes) {
    if (!names.contains(vc.account)) throw ScenarioError("assert.view_changes", "unknown account \"" + vc.account + "\"");
  }
}

Scenario parse_scenario(const json& doc) {
  Scenario s;
  Reader rd(s);
  rd.expect_object(doc, "");
  rd.only_keys(doc, "",
               {"name", "seed", "id_bits", "nodes", "r", "delta", "latency", "protocol", "resolver", "bucket_capacity",
                "accounts", "default_balance", "faults", "transactions", "churn", "horizon", "trace_messages",
                "assert"});

  if (doc.contains("name")) s.name = rd.string(doc["name"], "name");
  if (doc.contains("seed")) s.seed = rd.uint(doc["seed"], "seed");
  if (doc.contains("id_bits")) s.id_bits = static_cast<unsigned>(rd.uint(doc["id_bits"], "id_bits"));
  if (s.id_bits == 0 || s.id_bits > 256) throw ScenarioError("id_bits", "must be in [1, 256]");
  s.protocol.space = IdSpace(s.id_bits);
  if (doc.contains("delta")) s.latency.delta = rd.time(doc["delta"], "delta");
  if (s.latency.delta <= 0) throw ScenarioError("delta", "must be positive");
  // Defaults that scale with delta.
  s.latency.sluggish_extra = s.latency.delta;
  s.protocol.delta = s.latency.delta;
  s.protocol.view_timeout = 30 * s.latency.delta;

  if (!doc.contains("nodes")) throw ScenarioError("nodes", "missing");
  const auto& nodes = doc["nodes"];
  if (nodes.is_number()) {
    s.node_count = rd.uint(nodes, "nodes");
  } else {
    rd.expect_object(nodes, "nodes");
    rd.only_keys(nodes, "nodes", {"count", "ids"});
    if (nodes.contains("ids")) {
      if (!nodes["ids"].is_array()) throw ScenarioError("nodes.ids", "expected an array");
      for (std::size_t i = 0; i < nodes["ids"].size(); ++i) {
        s.node_ids.push_back(rd.identifier(nodes["ids"][i], index_path("nodes.ids", i)));
      }
    }
    s.node_count = nodes.contains("count") ? rd.uint(nodes["count"], "nodes.count") : s.node_ids.size();
    if (s.node_count < s.node_ids.size()) throw ScenarioError("nodes.count", "smaller than the number of ids");
  }
  if (doc.contains("r")) s.protocol.r = rd.uint(doc["r"], "r");

  if (doc.contains("latency")) {
    const auto& l = doc["latency"];
    rd.expect_object(l, "latency");
    rd.only_keys(l, "latency", {"min", "max", "sluggish_extra"});
    if (l.contains("min")) s.latency.min = rd.time(l["min"], "latency.min");
    if (l.contains("max")) s.latency.max = rd.time(l["max"], "latency.max");
    if (l.contains("sluggish_extra")) s.latency.sluggish_extra = rd.time(l["sluggish_extra"], "latency.sluggish_extra");
  }
  if (doc.contains("protocol")) parse_protocol(rd, doc["protocol"], "protocol", s);
  if (doc.contains("resolver")) {
    const auto v = rd.string(doc["resolver"], "resolver");
    if (v == "oracle") s.resolver = ResolverKind::oracle;
    else if (v == "lookup") s.resolver = ResolverKind::lookup;
    else throw ScenarioError("resolver", "expected oracle or lookup");
  }
  if (doc.contains("bucket_capacity")) s.bucket_capacity = rd.uint(doc["bucket_capacity"], "bucket_capacity");
  if (doc.contains("default_balance")) {
    s.default_balance = rd.integer(doc["default_balance"], "default_balance");
  }

  if (doc.contains("accounts")) {
    const auto& acc = doc["accounts"];
    if (acc.is_array()) {
      for (std::size_t i = 0; i < acc.size(); ++i) {
        s.accounts.push_back(AccountSpec{rd.string(acc[i], index_path("accounts", i)), std::nullopt, std::nullopt});
      }
    } else {
      rd.expect_object(acc, "accounts");
      for (const auto& [name, spec] : acc.items()) {
        const auto w = join_path("accounts", name);
        AccountSpec a{name, std::nullopt, std::nullopt};
        if (!spec.is_null()) {
          rd.expect_object(spec, w);
          rd.only_keys(spec, w, {"id", "balance"});
          if (spec.contains("id")) a.id = rd.identifier(spec["id"], join_path(w, "id"));
          if (spec.contains("balance")) a.balance = rd.integer(spec["balance"], join_path(w, "balance"));
        }
        s.accounts.push_back(std::move(a));
      }
    }
  }

  if (doc.contains("faults")) {
    const auto& faults = doc["faults"];
    if (!faults.is_array()) throw ScenarioError("faults", "expected an array");
    for (std::size_t i = 0; i < faults.size(); ++i) {
      const auto& f = faults[i];
      const auto w = index_path("faults", i);
      rd.expect_object(f, w);
      rd.only_keys(f, w, {"node", "behavior", "at", "intervals", "strategy"});
      if (!f.contains("node")) throw ScenarioError(join_path(w, "node"), "missing");
      if (!f.contains("behavior")) throw ScenarioError(join_path(w, "behavior"), "missing");
      FaultSpec spec;
      spec.node = rd.selector(f["node"], join_path(w, "node"));
      const auto behavior = rd.string(f["behavior"], join_path(w, "behavior"));
      if (behavior == "crash") {
        spec.behavior = Behavior::crash;
        if (f.contains("at")) spec.at = rd.time(f["at"], join_path(w, "at"));
      } else if (behavior == "sluggish") {
        spec.behavior = Behavior::sluggish;
        const auto wi = join_path(w, "intervals");
        if (!f.contains("intervals") || !f["intervals"].is_array()) throw ScenarioError(wi, "expected an array");
        for (std::size_t k = 0; k < f["intervals"].size(); ++k) {
          const auto& iv = f["intervals"][k];
          const auto wk = index_path(wi, k);
          if (!iv.is_array() || iv.size() != 2) throw ScenarioError(wk, "expected [begin, end]");
          Interval interval{rd.time(iv[0], wk), rd.time(iv[1], wk)};
          if (interval.end < interval.begin) throw ScenarioError(wk, "end before begin");
          spec.intervals.push_back(interval);
        }
      } else if (behavior == "byzantine") {
        spec.behavior = Behavior::byzantine;
        const auto ws = join_path(w, "strategy");
        if (!f.contains("strategy")) throw ScenarioError(ws, "missing");
        auto strategy = consensus::parse_strategy(rd.string(f["strategy"], ws));
        if (!strategy || *strategy == consensus::Strategy::honest) {
          throw ScenarioError(ws, "expected equivocate, vote-invalid, silent or stale-tip");
        }
        spec.strategy = *strategy;
      } else if (behavior != "honest") {
        throw ScenarioError(join_path(w, "behavior"), "expected crash, sluggish, byzantine or honest");
      }
      s.faults.push_back(std::move(spec));
    }
  }

  if (doc.contains("transactions")) {
    const auto& txs = doc["transactions"];
    if (!txs.is_array()) throw ScenarioError("transactions", "expected an array");
    for (std::size_t i = 0; i < txs.size(); ++i) {
      const auto& t = txs[i];
      const auto w = index_path("transactions", i);
      rd.expect_object(t, w);
      rd.only_keys(t, w, {"label", "at", "from", "to", "amount", "nonce", "via"});
      for (const char* k : {"from", "to", "amount"}) {
        if (!t.contains(k)) throw ScenarioError(join_path(w, k), "missing");
      }
      TxSpec tx;
      if (t.contains("label")) tx.label = rd.string(t["label"], join_path(w, "label"));
      if (t.contains("at")) tx.at = rd.time(t["at"], join_path(w, "at"));
      tx.from = rd.string(t["from"], join_path(w, "from"));
      tx.to = rd.string(t["to"], join_path(w, "to"));
      tx.amount = rd.integer(t["amount"], join_path(w, "amount"));
      if (t.contains("nonce")) tx.nonce = rd.uint(t["nonce"], join_path(w, "nonce"));
      if (t.contains("via")) tx.via = rd.selector(t["via"], join_path(w, "via"));
      s.transactions.push_back(std::move(tx));
    }
  }

  if (doc.contains("churn")) {
    const auto& c = doc["churn"];
    rd.expect_object(c, "churn");
    rd.only_keys(c, "churn", {"events", "poisson"});
    if (c.contains("events")) {
      if (!c["events"].is_array()) throw ScenarioError("churn.events", "expected an array");
      for (std::size_t i = 0; i < c["events"].size(); ++i) {
        const auto& e = c["events"][i];
        const auto w = index_path("churn.events", i);
        rd.expect_object(e, w);
        rd.only_keys(e, w, {"at", "join", "leave"});
        if (e.contains("join") == e.contains("leave")) throw ScenarioError(w, "give exactly one of join or leave");
        ChurnEvent ev;
        if (e.contains("at")) ev.at = rd.time(e["at"], join_path(w, "at"));
        ev.join = e.contains("join");
        const auto& target = ev.join ? e["join"] : e["leave"];
        if (!target.is_null()) ev.node = rd.selector(target, join_path(w, ev.join ? "join" : "leave"));
        if (ev.join && ev.node && !ev.node->id) throw ScenarioError(join_path(w, "join"), "a joining node needs an id");
        s.churn.push_back(std::move(ev));
      }
    }
    if (c.contains("poisson")) {
      const auto& p = c["poisson"];
      rd.expect_object(p, "churn.poisson");
      rd.only_keys(p, "churn.poisson", {"join_rate", "leave_rate", "until"});
      PoissonChurn pc;
      if (p.contains("join_rate")) pc.join_rate = rd.number(p["join_rate"], "churn.poisson.join_rate");
      if (p.contains("leave_rate")) pc.leave_rate = rd.number(p["leave_rate"], "churn.poisson.leave_rate");
      if (!p.contains("until")) throw ScenarioError("churn.poisson.until", "missing");
      pc.until = rd.time(p["until"], "churn.poisson.until");
      if (pc.join_rate < 0 || pc.leave_rate < 0) throw ScenarioError("churn.poisson", "rates must not be negative");
      s.poisson = pc;
    }
  }

  if (doc.contains("horizon")) s.horizon = rd.time(doc["horizon"], "horizon");
  if (doc.contains("trace_messages")) s.trace_messages = rd.boolean(doc["trace_messages"], "trace_messages");
  // Assertions refer to transactions, so they are read last.
  if (doc.contains("assert")) parse_assertions(rd, doc["assert"], "assert", s);

  s.validate();
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line and column.
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("parse error"); pos != std::string::npos) what = what.substr(pos);
    throw ScenarioError("line " + std::to_string(line) + ", column " + std::to_string(column), what);
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path.string(), "cannot open scenario file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

}  // namespace scalegraph::simnet
