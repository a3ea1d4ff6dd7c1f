#pragma once

// A fully bootstrapped, churn-free Kademlia network for lookup tests: every
// node has offered every other node to its routing table, in random order.

#include <algorithm>
#include <random>
#include <unordered_map>
#include <vector>

#include "scalegraph/ident.hpp"
#include "scalegraph/random.hpp"
#include "scalegraph/routing.hpp"

namespace scalegraph::testing {

struct StableNetwork {
  IdSpace space;
  std::vector<Identifier> nodes;
  std::unordered_map<Identifier, routing::RoutingTable> tables;

  StableNetwork(std::uint64_t seed, std::size_t n, unsigned bits = 32,
                std::size_t bucket_capacity = routing::kDefaultBucketCapacity)
      : space(bits) {
    std::mt19937_64 rng(seed);
    nodes = random_distinct_identifiers(rng, space, n);
    std::vector<Identifier> order = nodes;
    for (const auto& owner : nodes) {
      routing::RoutingTable table(owner, space, bucket_capacity);
      std::shuffle(order.begin(), order.end(), rng);
      for (const auto& peer : order) table.update(peer);
      tables.emplace(owner, std::move(table));
    }
  }

  routing::FindNodeEndpoint endpoint() const {
    return [this](const Identifier& to, const Identifier& target, std::size_t count)
               -> std::optional<std::vector<Identifier>> {
      auto it = tables.find(to);
      if (it == tables.end()) return std::nullopt;
      auto reply = it->second.local_closest(target, count);
      reply.push_back(to);  // a peer always knows itself
      return reply;
    };
  }

  const routing::RoutingTable& table(const Identifier& owner) const { return tables.at(owner); }
};

}  // namespace scalegraph::testing
