#pragma once

// TAG-style converge-cast: a BFS tree rooted at the sink. Each leader hands
// its aggregate to the first leader on its tree path towards the sink;
// non-leaders on that path only relay.

#include <algorithm>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/netsim/clusters.hpp"
#include "wsnagg/netsim/topology.hpp"

namespace wsnagg::netsim {

struct RoutingTree {
  NodeId sink = 0;
  std::vector<NodeId> parent;          // tree parent; the sink is its own parent
  std::vector<std::uint32_t> depth;    // kUnreachable off the tree
  std::vector<NodeId> leader_parent;   // kNoCluster unless the node is a routed leader
  std::vector<std::vector<NodeId>> relays;  // per leader: intermediate nodes on the way up

  bool reachable(NodeId v) const { return depth[v] != kUnreachable; }
};

inline RoutingTree build_routing_tree(const Topology& topo, NodeId sink) {
  const Bfs b = bfs(topo.adjacency, sink);
  RoutingTree t;
  t.sink = sink;
  t.parent = b.parent;
  t.depth = b.depth;
  t.leader_parent.assign(topo.size(), kNoCluster);
  t.relays.assign(topo.size(), {});
  return t;
}

// Fills in leader_parent / relays for the given leaders. Leaders off the
// tree are returned and left unrouted.
inline std::vector<NodeId> route_leaders(RoutingTree& tree, const std::vector<bool>& is_leader) {
  std::vector<NodeId> unreachable;
  for (NodeId l = 0; l < is_leader.size(); ++l) {
    if (!is_leader[l] || l == tree.sink) continue;
    if (!tree.reachable(l)) {
      unreachable.push_back(l);
      continue;
    }
    NodeId v = tree.parent[l];
    std::vector<NodeId> path;
    while (v != tree.sink && !is_leader[v]) {
      path.push_back(v);
      v = tree.parent[v];
    }
    tree.leader_parent[l] = v;
    tree.relays[l] = std::move(path);
  }
  return unreachable;
}

// Leaders ordered deepest first, so every child aggregate is ready before
// its leader parent sends.
inline std::vector<NodeId> upward_order(const RoutingTree& tree) {
  std::vector<NodeId> order;
  for (NodeId v = 0; v < tree.leader_parent.size(); ++v)
    if (tree.leader_parent[v] != kNoCluster) order.push_back(v);
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return tree.depth[a] > tree.depth[b]; });
  return order;
}

}  // namespace wsnagg::netsim
