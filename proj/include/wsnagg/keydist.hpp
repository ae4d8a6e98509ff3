#pragma once

// Random key predistribution: key pool, key rings, shared-key discovery,
// path-key establishment, and the closed-form connectivity / overhearing
// probabilities of the scheme.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::keydist {

// Radio neighbor relation; entry i lists the neighbors of node i.
using Adjacency = std::vector<std::vector<NodeId>>;

struct KeyPoolConfig {
  std::uint64_t pool_size = 1000;  // K
  std::uint64_t ring_size = 50;    // k

  void validate() const {
    if (pool_size < 1) throw ConfigError("key pool size must be >= 1");
    if (ring_size < 1 || ring_size > pool_size)
      throw ConfigError("key ring size must lie in [1, pool size]");
  }
};

struct KeyRing {
  NodeId node_id = 0;
  std::vector<KeyId> key_ids;  // sorted, distinct

  bool contains(KeyId id) const {
    return std::binary_search(key_ids.begin(), key_ids.end(), id);
  }
};

inline std::optional<KeyId> smallest_common_key(const KeyRing& a, const KeyRing& b) {
  auto i = a.key_ids.begin();
  auto j = b.key_ids.begin();
  while (i != a.key_ids.end() && j != b.key_ids.end()) {
    if (*i == *j) return *i;
    if (*i < *j)
      ++i;
    else
      ++j;
  }
  return std::nullopt;
}

using NodePair = std::pair<NodeId, NodeId>;

inline NodePair make_pair_key(NodeId u, NodeId v) { return u < v ? NodePair{u, v} : NodePair{v, u}; }

struct SecureLinkGraph {
  std::uint64_t pool_size = 0;
  std::map<NodePair, KeyId> direct_links;
  // Path keys carry synthetic ids >= pool_size.
  std::map<NodePair, KeyId> path_links;

  std::optional<KeyId> link_key(NodeId u, NodeId v) const {
    const NodePair p = make_pair_key(u, v);
    if (auto it = direct_links.find(p); it != direct_links.end()) return it->second;
    if (auto it = path_links.find(p); it != path_links.end()) return it->second;
    return std::nullopt;
  }

  bool has_direct(NodeId u, NodeId v) const { return direct_links.contains(make_pair_key(u, v)); }

  bool operator==(const SecureLinkGraph&) const = default;
};

// Uniform sampling of k of K key ids without replacement (Floyd's algorithm).
inline std::vector<KeyRing> draw_key_rings(const KeyPoolConfig& config, std::size_t node_count,
                                           std::uint64_t seed) {
  config.validate();
  if (node_count < 1) throw ConfigError("node count must be >= 1");
  Rng rng(seed);
  std::vector<KeyRing> rings;
  rings.reserve(node_count);
  const std::uint64_t K = config.pool_size;
  const std::uint64_t k = config.ring_size;
  for (std::size_t n = 0; n < node_count; ++n) {
    std::set<KeyId> chosen;
    for (std::uint64_t j = K - k; j < K; ++j) {
      std::uniform_int_distribution<std::uint64_t> pick(0, j);
      const KeyId t = pick(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    rings.push_back(KeyRing{static_cast<NodeId>(n), {chosen.begin(), chosen.end()}});
  }
  return rings;
}

inline SecureLinkGraph discover_shared_keys(const std::vector<KeyRing>& rings, const Adjacency& adjacency,
                                            std::uint64_t pool_size) {
  std::map<NodeId, const KeyRing*> by_node;
  for (const auto& r : rings) by_node[r.node_id] = &r;
  auto ring_of = [&](NodeId n) -> const KeyRing& {
    auto it = by_node.find(n);
    if (it == by_node.end()) throw MissingRingError("node " + std::to_string(n) + " has no key ring");
    return *it->second;
  };

  SecureLinkGraph graph;
  graph.pool_size = pool_size;
  for (NodeId u = 0; u < adjacency.size(); ++u) {
    const KeyRing& ru = ring_of(u);
    for (NodeId v : adjacency[u]) {
      if (v <= u) continue;
      if (auto key = smallest_common_key(ru, ring_of(v))) graph.direct_links.emplace(NodePair{u, v}, *key);
    }
  }
  return graph;
}

inline SecureLinkGraph discover_shared_keys(const std::vector<KeyRing>& rings, const Adjacency& adjacency) {
  std::uint64_t pool = 0;
  for (const auto& r : rings)
    if (!r.key_ids.empty()) pool = std::max<std::uint64_t>(pool, r.key_ids.back() + 1);
  return discover_shared_keys(rings, adjacency, pool);
}

// Adjacent pairs without a shared key but joined by a chain of direct links
// receive a fresh path key. The direct-link graph is unchanged, so a second
// application adds nothing.
inline SecureLinkGraph establish_path_keys(SecureLinkGraph graph, const Adjacency& adjacency) {
  std::vector<NodeId> parent(adjacency.size());
  std::iota(parent.begin(), parent.end(), NodeId{0});
  auto find = [&](NodeId x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [pair, key] : graph.direct_links) {
    (void)key;
    if (pair.first >= adjacency.size() || pair.second >= adjacency.size()) continue;
    const NodeId a = find(pair.first), b = find(pair.second);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }

  KeyId next = graph.pool_size;
  for (const auto& [pair, key] : graph.path_links) next = std::max(next, key + 1);

  for (NodeId u = 0; u < adjacency.size(); ++u) {
    for (NodeId v : adjacency[u]) {
      if (v <= u) continue;
      const NodePair p{u, v};
      if (graph.direct_links.contains(p) || graph.path_links.contains(p)) continue;
      if (find(u) == find(v)) graph.path_links.emplace(p, next++);
    }
  }
  return graph;
}

// 1 - ((K-k)!)^2 / ((K-2k)! K!) as an exact rational, via the product
// prod_{i<k} (K-k-i)/(K-i).
inline Rational connectivity_probability_exact(std::uint64_t pool_size, std::uint64_t ring_size) {
  if (pool_size < 1) throw DomainError("key pool size must be >= 1");
  if (ring_size > pool_size) throw DomainError("ring size exceeds pool size");
  if (2 * ring_size > pool_size) return Rational(1);
  Rational disjoint(1);
  for (std::uint64_t i = 0; i < ring_size; ++i)
    disjoint *= Rational(BigInt(pool_size - ring_size - i), BigInt(pool_size - i));
  return Rational(1) - disjoint;
}

inline double connectivity_probability(const KeyPoolConfig& c) {
  return static_cast<double>(connectivity_probability_exact(c.pool_size, c.ring_size));
}

inline double overhear_probability(const KeyPoolConfig& c) {
  if (c.pool_size < 1) throw DomainError("key pool size must be >= 1");
  if (c.ring_size > c.pool_size) throw DomainError("ring size exceeds pool size");
  return static_cast<double>(c.ring_size) / static_cast<double>(c.pool_size);
}

// Fraction of `pairs` independently drawn ring pairs that share a key.
inline double empirical_connectivity(const KeyPoolConfig& config, std::size_t pairs, std::uint64_t seed) {
  const auto rings = draw_key_rings(config, 2 * pairs, seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs; ++i)
    if (smallest_common_key(rings[2 * i], rings[2 * i + 1])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs);
}

}  // namespace wsnagg::keydist
