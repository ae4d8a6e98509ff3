#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/keydist.hpp"
#include "wsnagg/netsim/config.hpp"

namespace wsnagg::netsim {

using keydist::Adjacency;

struct Position {
  double x = 0, y = 0;
};

struct Topology {
  std::vector<Position> positions;
  Adjacency adjacency;  // sorted neighbor lists
  NodeId sink = 0;
  std::vector<bool> in_sink_component;
  bool connected = true;

  std::size_t size() const noexcept { return positions.size(); }
  bool adjacent(NodeId u, NodeId v) const {
    const auto& n = adjacency[u];
    return std::binary_search(n.begin(), n.end(), v);
  }
  std::size_t participant_count() const {
    return static_cast<std::size_t>(std::count(in_sink_component.begin(), in_sink_component.end(), true));
  }
};

// Hop distances from `root` (max value when unreachable) and BFS parents.
struct Bfs {
  std::vector<std::uint32_t> depth;
  std::vector<NodeId> parent;
};

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

inline Bfs bfs(const Adjacency& adj, NodeId root) {
  Bfs out{std::vector<std::uint32_t>(adj.size(), kUnreachable), std::vector<NodeId>(adj.size(), root)};
  std::deque<NodeId> q{root};
  out.depth[root] = 0;
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop_front();
    for (NodeId v : adj[u]) {
      if (out.depth[v] != kUnreachable) continue;
      out.depth[v] = out.depth[u] + 1;
      out.parent[v] = u;
      q.push_back(v);
    }
  }
  return out;
}

// Builds the adjacency for given positions and radio range; the sink is the
// node nearest the area center (lowest id on ties).
inline Topology make_topology(std::vector<Position> positions, double radio_range, double area_side) {
  Topology t;
  t.positions = std::move(positions);
  const std::size_t n = t.positions.size();
  t.adjacency.assign(n, {});
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) {
      const double dx = t.positions[i].x - t.positions[j].x;
      const double dy = t.positions[i].y - t.positions[j].y;
      if (std::hypot(dx, dy) <= radio_range) {
        t.adjacency[i].push_back(j);
        t.adjacency[j].push_back(i);
      }
    }
  double best = std::numeric_limits<double>::infinity();
  for (NodeId i = 0; i < n; ++i) {
    const double d = std::hypot(t.positions[i].x - area_side / 2, t.positions[i].y - area_side / 2);
    if (d < best) {
      best = d;
      t.sink = i;
    }
  }
  const Bfs b = bfs(t.adjacency, t.sink);
  t.in_sink_component.resize(n);
  for (NodeId i = 0; i < n; ++i) t.in_sink_component[i] = b.depth[i] != kUnreachable;
  t.connected = t.participant_count() == n;
  return t;
}

inline Topology place_nodes(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 1));
  std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
  std::vector<Position> pos(cfg.node_count);
  for (auto& p : pos) {
    p.x = coord(rng);
    p.y = coord(rng);
  }
  return make_topology(std::move(pos), cfg.radio_range, cfg.area_side);
}

// Topology from an explicit neighbor relation (used for hand-built cases).
inline Topology topology_from_adjacency(Adjacency adj, NodeId sink) {
  Topology t;
  t.positions.resize(adj.size());
  for (auto& n : adj) std::sort(n.begin(), n.end());
  t.adjacency = std::move(adj);
  t.sink = sink;
  const Bfs b = bfs(t.adjacency, sink);
  t.in_sink_component.resize(t.adjacency.size());
  for (NodeId i = 0; i < t.adjacency.size(); ++i) t.in_sink_component[i] = b.depth[i] != kUnreachable;
  t.connected = t.participant_count() == t.adjacency.size();
  return t;
}

}  // namespace wsnagg::netsim
