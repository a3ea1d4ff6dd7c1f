#include "scalegraph/routing.hpp"

#include <algorithm>
#include <stdexcept>

namespace scalegraph::routing {

RoutingTable::RoutingTable(Identifier owner, IdSpace space, std::size_t bucket_capacity)
    : owner_(owner), space_(space), bucket_capacity_(bucket_capacity), buckets_(space.bits()) {
  if (bucket_capacity == 0) throw std::invalid_argument("bucket capacity must be positive");
}

UpdateResult RoutingTable::update(const Identifier& node, const LivenessProbe& is_alive) {
  if (node == owner_) return UpdateResult::rejected_owner;
  const int index = distance(owner_, node).bucket_index();
  auto& bucket = buckets_.at(static_cast<std::size_t>(index));

  if (auto it = std::find(bucket.begin(), bucket.end(), node); it != bucket.end()) {
    bucket.erase(it);
    bucket.push_back(node);
    return UpdateResult::refreshed;
  }
  if (bucket.size() < bucket_capacity_) {
    bucket.push_back(node);
    ++size_;
    return UpdateResult::inserted;
  }
  const Identifier stale = bucket.front();
  if (is_alive && !is_alive(stale)) {
    bucket.pop_front();
    bucket.push_back(node);
    return UpdateResult::replaced_stale;
  }
  // The probed entry answered, so it becomes most recently seen.
  bucket.pop_front();
  bucket.push_back(stale);
  return UpdateResult::bucket_full;
}

bool RoutingTable::remove(const Identifier& node) {
  if (node == owner_) return false;
  auto& bucket = buckets_.at(static_cast<std::size_t>(distance(owner_, node).bucket_index()));
  auto it = std::find(bucket.begin(), bucket.end(), node);
  if (it == bucket.end()) return false;
  bucket.erase(it);
  --size_;
  return true;
}

bool RoutingTable::contains(const Identifier& node) const {
  if (node == owner_) return false;
  const auto& bucket = buckets_.at(static_cast<std::size_t>(distance(owner_, node).bucket_index()));
  return std::find(bucket.begin(), bucket.end(), node) != bucket.end();
}

std::vector<Identifier> RoutingTable::entries() const {
  std::vector<Identifier> out;
  out.reserve(size_);
  for (const auto& bucket : buckets_) out.insert(out.end(), bucket.begin(), bucket.end());
  return out;
}

std::vector<Identifier> RoutingTable::local_closest(const Identifier& target, std::size_t count) const {
  std::vector<Identifier> all = entries();
  const std::size_t take = std::min(count, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [&](const Identifier& a, const Identifier& b) {
                      return distance(a, target) < distance(b, target);
                    });
  all.resize(take);
  return all;
}

LookupPool::LookupPool(Identifier target, std::size_t result_size, std::size_t alpha,
                       std::span<const Identifier> seeds, std::optional<Identifier> self)
    : target_(target), result_size_(result_size), alpha_(alpha) {
  if (result_size == 0 || alpha == 0) throw std::invalid_argument("lookup needs r >= 1 and alpha >= 1");
  if (self) add_candidate(*self, State::responded);
  for (const auto& id : seeds) add_candidate(id, State::fresh);
}

void LookupPool::add_candidate(const Identifier& id, State state) {
  candidates_.try_emplace(distance(id, target_), Candidate{id, state});
}

std::vector<Identifier> LookupPool::next_batch() {
  std::vector<Identifier> batch;
  if (in_flight_ >= alpha_) return batch;
  std::size_t seen = 0;
  for (auto& [dist, cand] : candidates_) {
    if (cand.state == State::failed) continue;
    if (seen++ >= result_size_) break;
    if (cand.state == State::fresh) {
      cand.state = State::in_flight;
      ++in_flight_;
      batch.push_back(cand.id);
      if (in_flight_ >= alpha_) break;
    }
  }
  if (!batch.empty()) ++rounds_;
  return batch;
}

void LookupPool::on_reply(const Identifier& from, std::span<const Identifier> nodes) {
  auto it = candidates_.find(distance(from, target_));
  if (it != candidates_.end() && it->second.state == State::in_flight) {
    it->second.state = State::responded;
    --in_flight_;
  }
  for (const auto& id : nodes) add_candidate(id, State::fresh);
}

void LookupPool::on_failure(const Identifier& from) {
  auto it = candidates_.find(distance(from, target_));
  if (it != candidates_.end() && it->second.state == State::in_flight) {
    it->second.state = State::failed;
    --in_flight_;
    ++failures_;
  }
}

bool LookupPool::finished() const {
  if (in_flight_ > 0) return false;
  std::size_t seen = 0;
  for (const auto& [dist, cand] : candidates_) {
    if (cand.state == State::failed) continue;
    if (seen++ >= result_size_) break;
    if (cand.state != State::responded) return false;
  }
  return true;
}

std::vector<Identifier> LookupPool::result() const {
  std::vector<Identifier> out;
  for (const auto& [dist, cand] : candidates_) {
    if (out.size() >= result_size_) break;
    if (cand.state == State::responded) out.push_back(cand.id);
  }
  return out;
}

std::optional<Distance> LookupPool::worst_best() const {
  std::size_t seen = 0;
  for (const auto& [dist, cand] : candidates_) {
    if (cand.state == State::failed) continue;
    if (++seen == result_size_) return dist;
  }
  return std::nullopt;
}

LookupResult iterative_find_nodes(const FindNodeEndpoint& network, const RoutingTable& start_table,
                                  const Identifier& target, std::size_t r, const LookupOptions& options) {
  const std::size_t reply_count =
      options.reply_count != 0 ? options.reply_count : std::max(r, start_table.bucket_capacity());
  const auto seeds = start_table.local_closest(target, reply_count);
  LookupPool pool(target, r, options.alpha, seeds, start_table.owner());

  LookupResult result;
  while (!pool.finished()) {
    const auto batch = pool.next_batch();
    if (batch.empty()) break;
    std::size_t answered = 0;
    for (const auto& peer : batch) {
      if (auto reply = network(peer, target, reply_count)) {
        pool.on_reply(peer, *reply);
        ++answered;
      } else {
        pool.on_failure(peer);
      }
    }
    if (answered == 0) result.partial = true;
    result.worst_best_history.push_back(pool.worst_best());
  }
  result.nodes = pool.result();
  result.rounds = pool.rounds();
  return result;
}

std::vector<Identifier> oracle_closest(std::span<const Identifier> all_nodes, const Identifier& target,
                                       std::size_t r) {
  std::vector<Identifier> out(all_nodes.begin(), all_nodes.end());
  const std::size_t take = std::min(r, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(take), out.end(),
                    [&](const Identifier& a, const Identifier& b) {
                      return distance(a, target) < distance(b, target);
                    });
  out.resize(take);
  return out;
}

ClosestIndex::ClosestIndex(std::vector<Identifier> nodes, IdSpace space)
    : sorted_(std::move(nodes)), space_(space) {
  std::sort(sorted_.begin(), sorted_.end());
  if (std::adjacent_find(sorted_.begin(), sorted_.end()) != sorted_.end()) {
    throw std::invalid_argument("ClosestIndex requires distinct identifiers");
  }
}

ClosestIndex::Window ClosestIndex::subtree_range(const Identifier& target, unsigned prefix_len) const {
  const unsigned free_bits = space_.bits() - prefix_len;
  const Identifier mask = Identifier::low_mask(free_bits);
  const Identifier low = target & ~mask;
  const Identifier high = low | mask;
  const auto first = std::lower_bound(sorted_.begin(), sorted_.end(), low);
  const auto last = std::upper_bound(first, sorted_.end(), high);
  return {static_cast<std::size_t>(first - sorted_.begin()), static_cast<std::size_t>(last - sorted_.begin())};
}

ClosestIndex::Window ClosestIndex::window(const Identifier& target, std::size_t r) const {
  r = std::min(r, sorted_.size());
  if (r == 0) return {};
  // Largest prefix length whose subtree around target still holds r nodes.
  unsigned lo = 0;
  unsigned hi = space_.bits();
  while (lo < hi) {
    const unsigned mid = (lo + hi + 1) / 2;
    const auto w = subtree_range(target, mid);
    if (w.end - w.begin >= r) lo = mid;
    else hi = mid - 1;
  }
  return subtree_range(target, lo);
}

std::vector<std::size_t> ClosestIndex::closest_ranks(const Identifier& target, std::size_t r) const {
  r = std::min(r, sorted_.size());
  const Window w = window(target, r);
  std::vector<std::size_t> ranks(w.end - w.begin);
  for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = w.begin + i;
  std::partial_sort(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(r), ranks.end(),
                    [&](std::size_t a, std::size_t b) {
                      return distance(sorted_[a], target) < distance(sorted_[b], target);
                    });
  ranks.resize(r);
  return ranks;
}

std::vector<Identifier> ClosestIndex::closest(const Identifier& target, std::size_t r) const {
  std::vector<Identifier> out;
  for (std::size_t rank : closest_ranks(target, r)) out.push_back(sorted_[rank]);
  return out;
}

}  // namespace scalegraph::routing
