#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "scalegraph/ident.hpp"

namespace scalegraph::routing {

inline constexpr std::size_t kDefaultBucketCapacity = 20;
inline constexpr std::size_t kDefaultAlpha = 3;

enum class UpdateResult { inserted, refreshed, rejected_owner, replaced_stale, bucket_full };

/// Kademlia routing table. Bucket i holds nodes whose distance to the owner
/// has its highest set bit at position i; entries are kept least-recently
/// seen first.
class RoutingTable {
public:
  using LivenessProbe = std::function<bool(const Identifier&)>;

  RoutingTable(Identifier owner, IdSpace space, std::size_t bucket_capacity = kDefaultBucketCapacity);

  /// Records contact with node. On overflow the least-recently-seen entry is
  /// probed; it is evicted only if the probe reports it dead. An empty probe
  /// treats every entry as alive.
  UpdateResult update(const Identifier& node, const LivenessProbe& is_alive = {});
  bool remove(const Identifier& node);
  bool contains(const Identifier& node) const;

  /// The count entries closest to target, distance-ascending.
  std::vector<Identifier> local_closest(const Identifier& target, std::size_t count) const;

  const Identifier& owner() const noexcept { return owner_; }
  const IdSpace& space() const noexcept { return space_; }
  std::size_t bucket_capacity() const noexcept { return bucket_capacity_; }
  std::size_t size() const noexcept { return size_; }
  const std::deque<Identifier>& bucket(unsigned index) const { return buckets_.at(index); }
  std::size_t bucket_count() const noexcept { return buckets_.size(); }
  std::vector<Identifier> entries() const;

private:
  Identifier owner_;
  IdSpace space_;
  std::size_t bucket_capacity_;
  std::size_t size_ = 0;
  std::vector<std::deque<Identifier>> buckets_;
};

/// Candidate pool of an iterative lookup.
class LookupPool {
public:
  LookupPool(Identifier target, std::size_t result_size, std::size_t alpha,
             std::span<const Identifier> seeds, std::optional<Identifier> self = std::nullopt);

  /// Next requests to issue: unqueried members of the current best set, at
  /// most alpha minus the number already in flight. Starts a new round when
  /// non-empty.
  std::vector<Identifier> next_batch();
  void on_reply(const Identifier& from, std::span<const Identifier> nodes);
  void on_failure(const Identifier& from);

  /// No request in flight and every member of the best set has answered.
  bool finished() const;
  /// Best known responsive candidates, distance-ascending.
  std::vector<Identifier> result() const;

  const Identifier& target() const noexcept { return target_; }
  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t in_flight() const noexcept { return in_flight_; }
  std::size_t failures() const noexcept { return failures_; }
  /// Distance of the worst member of the best set, if it is full.
  std::optional<Distance> worst_best() const;

private:
  enum class State { fresh, in_flight, responded, failed };
  struct Candidate {
    Identifier id;
    State state;
  };

  void add_candidate(const Identifier& id, State state);

  Identifier target_;
  std::size_t result_size_;
  std::size_t alpha_;
  std::map<Distance, Candidate> candidates_;
  std::size_t in_flight_ = 0;
  std::size_t rounds_ = 0;
  std::size_t failures_ = 0;
};

/// Synchronous find-node transport: returns the peer's closest entries, or
/// nullopt when the request times out.
using FindNodeEndpoint = std::function<std::optional<std::vector<Identifier>>(
    const Identifier& to, const Identifier& target, std::size_t count)>;

struct LookupOptions {
  std::size_t alpha = kDefaultAlpha;
  /// Entries requested from each peer; 0 means max(r, bucket capacity).
  std::size_t reply_count = 0;
};

struct LookupResult {
  std::vector<Identifier> nodes;
  std::size_t rounds = 0;
  /// Set when some round had every in-flight request time out.
  bool partial = false;
  /// Distance of the r-th best candidate after each round.
  std::vector<std::optional<Distance>> worst_best_history;
};

/// Iterative lookup for the r nodes closest to target, starting from the
/// owner of start_table. The owner itself is a candidate.
LookupResult iterative_find_nodes(const FindNodeEndpoint& network, const RoutingTable& start_table,
                                  const Identifier& target, std::size_t r,
                                  const LookupOptions& options = {});

/// Ground truth: the r closest of all_nodes by full sort.
std::vector<Identifier> oracle_closest(std::span<const Identifier> all_nodes, const Identifier& target,
                                       std::size_t r);

/// Sorted node population answering closest-r queries without a full scan.
/// The r closest nodes to a target lie in the deepest address-space subtree
/// around the target that still holds r nodes, which is a contiguous range
/// of the sorted order.
class ClosestIndex {
public:
  struct Window {
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  ClosestIndex(std::vector<Identifier> nodes, IdSpace space);

  const std::vector<Identifier>& sorted() const noexcept { return sorted_; }
  std::size_t size() const noexcept { return sorted_.size(); }

  /// Rank range guaranteed to contain the r closest nodes.
  Window window(const Identifier& target, std::size_t r) const;
  /// Ranks (positions in sorted()) of the r closest nodes, distance-ascending.
  std::vector<std::size_t> closest_ranks(const Identifier& target, std::size_t r) const;
  std::vector<Identifier> closest(const Identifier& target, std::size_t r) const;

private:
  Window subtree_range(const Identifier& target, unsigned prefix_len) const;

  std::vector<Identifier> sorted_;
  IdSpace space_;
};

}  // namespace scalegraph::routing
