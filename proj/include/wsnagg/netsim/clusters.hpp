#pragma once

// HELLO/JOIN cluster formation. The sink is always a leader and starts the
// HELLO wave; the wave advances one hop per round.

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/netsim/topology.hpp"

namespace wsnagg::netsim {

inline constexpr NodeId kNoCluster = std::numeric_limits<NodeId>::max();

struct ClusterAssignment {
  std::vector<NodeId> leader_of;     // kNoCluster outside the sink component
  std::vector<bool> is_leader;       // final role
  std::vector<bool> sent_hello;      // elected at some point (sink included)
  std::vector<bool> sent_join;
  std::map<NodeId, std::vector<NodeId>> clusters;  // leader -> members, leader first
  std::size_t formation_rounds = 0;

  std::size_t leader_count() const { return clusters.size(); }
  const std::vector<NodeId>& members(NodeId leader) const { return clusters.at(leader); }
};

// Returns true when the node elects itself leader.
using ElectionCoin = std::function<bool(NodeId)>;

namespace detail {

struct Heard {
  int via_join = 1;  // 0 = direct HELLO from the leader
  NodeId leader = kNoCluster;
  bool operator<(const Heard& o) const { return via_join != o.via_join ? via_join < o.via_join : leader < o.leader; }
};

inline std::map<NodeId, std::size_t> cluster_sizes(const std::vector<NodeId>& leader_of) {
  std::map<NodeId, std::size_t> size;
  for (NodeId l : leader_of)
    if (l != kNoCluster) ++size[l];
  return size;
}

// A cluster below three nodes takes the lowest-id adjacent member of a
// neighboring cluster that can spare one (size > 3). Repeats until stable.
inline void rebalance(const Topology& topo, std::vector<NodeId>& leader_of) {
  for (bool changed = true; changed;) {
    changed = false;
    auto size = cluster_sizes(leader_of);
    for (const auto& [leader, n] : size) {
      if (n >= 3) continue;
      NodeId best = kNoCluster;
      for (NodeId v = 0; v < leader_of.size(); ++v) {
        if (leader_of[v] != leader) continue;
        for (NodeId w : topo.adjacency[v]) {
          const NodeId lw = leader_of[w];
          if (lw == kNoCluster || lw == leader || lw == w || size[lw] <= 3) continue;
          best = std::min(best, w);
        }
      }
      if (best == kNoCluster) continue;
      leader_of[best] = leader;
      changed = true;
      break;
    }
  }
}

// Remaining small clusters other than the sink's merge into the adjacent
// cluster with the smallest leader id; their leader becomes a member.
inline void dissolve(const Topology& topo, std::vector<NodeId>& leader_of) {
  for (bool changed = true; changed;) {
    changed = false;
    const auto size = cluster_sizes(leader_of);
    for (const auto& [leader, n] : size) {
      if (n >= 3 || leader == topo.sink) continue;
      NodeId target = kNoCluster;
      for (NodeId v = 0; v < leader_of.size(); ++v) {
        if (leader_of[v] != leader) continue;
        for (NodeId w : topo.adjacency[v])
          if (leader_of[w] != kNoCluster && leader_of[w] != leader) target = std::min(target, leader_of[w]);
      }
      if (target == kNoCluster) continue;
      for (auto& l : leader_of)
        if (l == leader) l = target;
      changed = true;
      break;
    }
  }
}

}  // namespace detail

// On first activation (a HELLO from a leader, or a JOIN naming one) a node
// flips the election coin. Leaders send HELLO next round; the others pick a
// leader (direct HELLO first, then lowest leader id) and send a JOIN naming
// it, which neighbors may follow. Every node of the sink component thus ends
// with a leader.
inline ClusterAssignment form_clusters(const Topology& topo, const ElectionCoin& coin) {
  const std::size_t n = topo.size();
  ClusterAssignment out;
  out.leader_of.assign(n, kNoCluster);
  out.is_leader.assign(n, false);
  out.sent_hello.assign(n, false);
  out.sent_join.assign(n, false);
  if (n == 0) return out;

  struct Announcement {
    NodeId from;
    bool hello;
    NodeId leader;
  };
  out.leader_of[topo.sink] = topo.sink;
  out.sent_hello[topo.sink] = true;
  std::vector<Announcement> frontier{{topo.sink, true, topo.sink}};

  while (!frontier.empty()) {
    ++out.formation_rounds;
    std::map<NodeId, detail::Heard> heard;
    for (const auto& a : frontier)
      for (NodeId v : topo.adjacency[a.from]) {
        if (out.leader_of[v] != kNoCluster) continue;
        const detail::Heard h{a.hello ? 0 : 1, a.leader};
        auto [it, fresh] = heard.try_emplace(v, h);
        if (!fresh && h < it->second) it->second = h;
      }
    std::vector<Announcement> next;
    for (const auto& [v, h] : heard) {
      if (coin(v)) {
        out.leader_of[v] = v;
        out.sent_hello[v] = true;
        next.push_back({v, true, v});
      } else {
        out.leader_of[v] = h.leader;
        out.sent_join[v] = true;
        next.push_back({v, false, h.leader});
      }
    }
    frontier = std::move(next);
  }

  detail::rebalance(topo, out.leader_of);
  detail::dissolve(topo, out.leader_of);

  for (NodeId v = 0; v < n; ++v) {
    const NodeId l = out.leader_of[v];
    if (l == kNoCluster) continue;
    auto& c = out.clusters[l];
    if (v != l) c.push_back(v);
  }
  for (auto& [l, c] : out.clusters) {
    out.is_leader[l] = true;
    c.insert(c.begin(), l);
  }
  return out;
}

inline ClusterAssignment form_clusters(const Topology& topo, double p_c, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 2));
  std::bernoulli_distribution elect(p_c);
  return form_clusters(topo, [&](NodeId) { return elect(rng); });
}

}  // namespace wsnagg::netsim
