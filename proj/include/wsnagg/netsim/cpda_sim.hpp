#pragma once

// One aggregation round over a random deployment: cluster formation, the
// in-cluster CPDA exchange (or plain TAG), and converge-cast to the sink.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/cpda.hpp"
#include "wsnagg/error.hpp"
#include "wsnagg/keydist.hpp"
#include "wsnagg/netsim/clusters.hpp"
#include "wsnagg/netsim/config.hpp"
#include "wsnagg/netsim/network.hpp"
#include "wsnagg/netsim/routing.hpp"
#include "wsnagg/netsim/topology.hpp"

namespace wsnagg::netsim {

struct CpdaRun {
  Topology topology;
  ClusterAssignment clusters;  // empty for tag_plain
  RoutingTree tree;
  std::vector<bool> abnormal;
  std::vector<NodeId> aborted_leaders;
  Metrics metrics;
};

namespace detail {

// Abnormal nodes for the hardened worst case: floor(fraction * N) of the
// participants; fraction 1 selects everyone.
inline std::vector<bool> pick_abnormal(const Topology& topo, double fraction, std::uint64_t seed) {
  std::vector<NodeId> pool;
  for (NodeId v = 0; v < topo.size(); ++v)
    if (topo.in_sink_component[v]) pool.push_back(v);
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size()) + 1e-9));
  Rng rng(derive_seed(seed, 8));
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<bool> out(topo.size(), false);
  for (std::size_t i = 0; i < std::min(k, pool.size()); ++i) out[pool[i]] = true;
  return out;
}

// m distinct seeds from [lo, hi) avoiding `taken`.
inline std::vector<BigInt> draw_seeds(Rng& rng, std::size_t m, std::uint64_t lo, std::uint64_t hi,
                                      std::set<std::uint64_t> taken = {}) {
  if (hi <= lo || hi - lo < m + taken.size()) throw ConfigError("cluster too large for the public seed range");
  std::uniform_int_distribution<std::uint64_t> d(lo, hi - 1);
  std::vector<BigInt> out;
  while (out.size() < m) {
    const auto s = d(rng);
    if (taken.insert(s).second) out.emplace_back(s);
  }
  return out;
}

}  // namespace detail

inline CpdaRun simulate_cpda(const SimConfig& cfg, SimMode mode) {
  cfg.validate();
  CpdaRun run;
  run.topology = place_nodes(cfg);
  const Topology& topo = run.topology;
  const std::size_t n = topo.size();
  Metrics& met = run.metrics;
  met = make_metrics(cfg, topo);
  Radio radio(topo, 0.0, met, derive_seed(cfg.seed, 4));

  // Readings: one sample per participant.
  std::vector<BigInt> value(n, 0);
  {
    Rng rng(derive_seed(cfg.seed, 5));
    for (NodeId v = 0; v < n; ++v) {
      if (!met.participating[v]) continue;
      value[v] = uniform_big(rng, 0, cfg.value_bound);
      account_energy(EnergyEvent::sense, v, met.energy);
    }
  }

  run.tree = build_routing_tree(topo, topo.sink);
  std::vector<BigInt> agg(n, 0);

  if (mode == SimMode::tag_plain) {
    std::vector<NodeId> order;
    for (NodeId v = 0; v < n; ++v)
      if (met.participating[v]) {
        radio.broadcast(v, MsgType::hello);
        order.push_back(v);
        agg[v] = value[v];
        met.true_aggregate += value[v];
      }
    std::stable_sort(order.begin(), order.end(),
                     [&](NodeId a, NodeId b) { return run.tree.depth[a] > run.tree.depth[b]; });
    for (NodeId v : order) {
      radio.broadcast(v, MsgType::tag_data);
      if (v != topo.sink) agg[run.tree.parent[v]] += agg[v];
    }
    met.sink_aggregate = agg[topo.sink];
    return run;
  }

  run.clusters = form_clusters(topo, cfg.leader_probability, cfg.seed);
  const ClusterAssignment& cl = run.clusters;
  for (NodeId v = 0; v < n; ++v) {
    if (cl.sent_hello[v]) radio.broadcast(v, MsgType::hello);
    if (cl.sent_join[v]) radio.broadcast(v, MsgType::join);
  }
  met.clusters = cl.leader_count();
  met.leaders = cl.leader_count();

  const keydist::KeyPoolConfig pool{cfg.key_pool, cfg.key_ring};
  const auto links = keydist::establish_path_keys(
      keydist::discover_shared_keys(keydist::draw_key_rings(pool, n, derive_seed(cfg.seed, 6)), topo.adjacency,
                                    cfg.key_pool),
      topo.adjacency);

  run.abnormal = mode == SimMode::hardened ? detail::pick_abnormal(topo, cfg.fault_fraction, cfg.seed)
                                           : std::vector<bool>(n, false);

  Rng rng(derive_seed(cfg.seed, 7));
  const std::uint64_t synthetic_salt = derive_seed(cfg.seed, 9);
  const std::uint64_t S = cfg.seed_bound, R = cfg.coeff_bound;

  for (const auto& [leader, members] : cl.clusters) {
    const std::size_t m = members.size();
    BigInt plain_sum = 0;
    for (NodeId v : members) plain_sum += value[v];

    if (m < 3) {
      ++met.small_clusters;
      for (NodeId v : members)
        if (v != leader) radio.broadcast(v, MsgType::tag_data);
      agg[leader] = plain_sum;
      met.true_aggregate += plain_sum;
      continue;
    }

    cpda::ClusterOptions opt;
    opt.value_bound = cfg.value_bound;
    opt.coeff_bound = cfg.coeff_bound;
    opt.pair_key = [&, members = &members](std::size_t i, std::size_t j) -> std::optional<KeyId> {
      if (auto k = links.link_key((*members)[i], (*members)[j])) return k;
      ++met.synthetic_pair_keys;
      const auto p = keydist::make_pair_key((*members)[i], (*members)[j]);
      return mix64(synthetic_salt ^ ((static_cast<std::uint64_t>(p.first) << 32) | p.second));
    };

    // Honest hardened participants draw seeds and coefficients from the
    // upper half of their ranges, which keeps both triangle checks satisfied.
    const bool upper_half = mode == SimMode::hardened;
    std::vector<cpda::NodeSecret> secrets(m);
    for (std::size_t i = 0; i < m; ++i) {
      secrets[i].private_value = value[members[i]];
      for (std::size_t d = 0; d + 1 < m; ++d)
        secrets[i].coefficients.push_back(uniform_big(rng, upper_half ? (R + 1) / 2 : 1, R));
    }

    const auto cpda_mode = mode == SimMode::efficient  ? cpda::Mode::efficient
                           : mode == SimMode::hardened ? cpda::Mode::hardened
                                                       : cpda::Mode::original;
    cpda::ClusterSeeds seeds;
    if (mode == SimMode::efficient) {
      const BigInt x = cpda::efficient_leader_seed(cfg.value_bound, cfg.coeff_bound, m);
      std::set<std::uint64_t> taken;
      if (x < S) taken.insert(static_cast<std::uint64_t>(x));
      seeds.seeds.push_back(x);
      for (auto& s : detail::draw_seeds(rng, m - 1, 1, S, taken)) seeds.seeds.push_back(std::move(s));
    } else {
      seeds.seeds = detail::draw_seeds(rng, m, upper_half ? (S + 1) / 2 : 1, S);
    }

    bool any_abnormal = false;
    if (mode == SimMode::hardened) {
      for (std::size_t i = 0; i < m; ++i)
        if (run.abnormal[members[i]]) {
          seeds.seeds[i] = BigInt(m * S) << i;
          any_abnormal = true;
        }
    }

    for (NodeId v : members) radio.broadcast(v, MsgType::seed);

    std::optional<BigInt> sum;
    try {
      sum = cpda::run_cluster(secrets, seeds, cpda_mode, met.ops, opt).recovered_sum;
    } catch (const ProtocolAbort&) {
      if (mode != SimMode::hardened) throw;
      // Validation round: two extra messages per participant, carrying the
      // challenge and a fresh seed.
      ++met.validation_rounds;
      for (NodeId v : members) {
        radio.broadcast(v, MsgType::validation);
        radio.broadcast(v, MsgType::validation);
      }
      if (!cfg.persistent_abnormal || !any_abnormal) {
        seeds.seeds = detail::draw_seeds(rng, m, (S + 1) / 2, S);
        try {
          sum = cpda::run_cluster(secrets, seeds, cpda_mode, met.ops, opt).recovered_sum;
        } catch (const ProtocolAbort&) {
        }
      }
    }

    if (!sum) {
      ++met.aborted_clusters;
      run.aborted_leaders.push_back(leader);
      continue;
    }
    for (NodeId v : members) {
      if (mode != SimMode::efficient || v != leader) radio.broadcast(v, MsgType::shares);
      if (mode != SimMode::efficient && v != leader) radio.broadcast(v, MsgType::f_value);
    }
    agg[leader] = *sum;
    met.true_aggregate += plain_sum;
  }

  const auto unreachable = route_leaders(run.tree, cl.is_leader);
  met.unreachable_leaders = unreachable.size();
  for (NodeId l : unreachable) met.true_aggregate -= agg[l];

  for (NodeId l : upward_order(run.tree)) {
    radio.broadcast(l, MsgType::aggregate);
    for (NodeId r : run.tree.relays[l]) radio.broadcast(r, MsgType::relay);
    agg[run.tree.leader_parent[l]] += agg[l];
  }
  radio.broadcast(topo.sink, MsgType::aggregate);  // result to the querier
  met.sink_aggregate = agg[topo.sink];
  return run;
}

inline Metrics run_cpda_sim(const SimConfig& cfg, SimMode mode) { return simulate_cpda(cfg, mode).metrics; }

}  // namespace wsnagg::netsim
