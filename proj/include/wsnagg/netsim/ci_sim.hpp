#pragma once

// Distributed max-estimation with optional insider detection. Rounds last one
// sampling period: every node samples, then handles the traffic of the
// previous round, then transmits. Suspect queries and their replies complete
// within the detecting round.

#include <cmath>
#include <limits>
#include <optional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "wsnagg/ciagg.hpp"
#include "wsnagg/common.hpp"
#include "wsnagg/netsim/config.hpp"
#include "wsnagg/netsim/faults.hpp"
#include "wsnagg/netsim/network.hpp"
#include "wsnagg/netsim/topology.hpp"

namespace wsnagg::netsim {

struct DetectionMetrics {
  std::size_t compromised = 0;
  std::size_t true_positive = 0, false_positive = 0, true_negative = 0, false_negative = 0;
  double detection_rate = 1.0;  // TP / (TP + FN); 1 with nothing to detect
  double fp_rate = 0.0;         // FP / (FP + TN)
  double fn_rate = 0.0;         // FN / (TP + FN)
  double energy_with_security = 0.0;
  double energy_without_security = 0.0;
  double delivery_ratio_with = 1.0;
  double delivery_ratio_without = 1.0;

  double energy_increase_pct() const {
    return energy_without_security > 0 ? 100.0 * (energy_with_security / energy_without_security - 1.0) : 0.0;
  }
};

struct CiRun {
  Topology topology;
  FaultSet faults;
  std::vector<bool> isolated;  // blocked by at least one honest detector
  std::vector<ciagg::GaussianEstimate> estimates;  // final global estimates
  std::vector<double> max_reading;                 // per node, over the run
  DetectionMetrics detection;
  Metrics metrics;
  std::uint64_t malicious_verdicts = 0;
};

namespace detail {

struct CiMessage {
  NodeId from;
  MsgType type;  // estimate or isolation
  ciagg::GaussianEstimate estimate;
  NodeId target = 0;  // isolation: the isolated node; estimate: where the data came from
};

struct CiNode {
  ciagg::GaussianEstimate global;
  NodeId origin = 0;  // node whose data the global estimate carries
  double last_trigger = 0.0;  // reading that last passed the change trigger
  double prev_local = 0.0;
  double reading = 0.0;  // latest sample
  ciagg::NodeTables tables;
  std::map<NodeId, NodeId> table_origin;  // neighbor -> origin of its last estimate
  std::set<NodeId> blocked;
  bool pending = false;
};

inline void fill_detection(DetectionMetrics& d, const FaultSet& faults, const std::vector<bool>& isolated) {
  d.compromised = faults.count();
  for (NodeId v = 0; v < isolated.size(); ++v) {
    const bool bad = faults.contains(v);
    if (bad && isolated[v]) ++d.true_positive;
    if (bad && !isolated[v]) ++d.false_negative;
    if (!bad && isolated[v]) ++d.false_positive;
    if (!bad && !isolated[v]) ++d.true_negative;
  }
  const double pos = static_cast<double>(d.true_positive + d.false_negative);
  const double neg = static_cast<double>(d.false_positive + d.true_negative);
  d.detection_rate = pos > 0 ? static_cast<double>(d.true_positive) / pos : 1.0;
  d.fn_rate = pos > 0 ? static_cast<double>(d.false_negative) / pos : 0.0;
  d.fp_rate = neg > 0 ? static_cast<double>(d.false_positive) / neg : 0.0;
}

}  // namespace detail

inline CiRun run_ci_sim(const SimConfig& cfg, double fault_fraction, bool security_enabled) {
  using ciagg::GaussianEstimate;
  cfg.validate();
  CiRun run;
  run.topology = place_nodes(cfg);
  const Topology& topo = run.topology;
  const std::size_t n = topo.size();
  Metrics& met = run.metrics;
  met = make_metrics(cfg, topo);
  met.participating.assign(n, true);  // no routing: every node takes part
  Radio radio(topo, cfg.link_loss, met, derive_seed(cfg.seed, 11));
  run.faults = inject_faults(n, fault_fraction, cfg.fault_offset_sigmas, cfg.seed);
  run.isolated.assign(n, false);
  run.max_reading.assign(n, -std::numeric_limits<double>::infinity());

  const double var0 = cfg.temp_sigma * cfg.temp_sigma;
  const double offset = cfg.fault_offset_sigmas * cfg.temp_sigma;
  std::vector<Rng> sensor;
  sensor.reserve(n);
  for (NodeId v = 0; v < n; ++v) sensor.emplace_back(derive_seed(cfg.seed, 1000 + v));
  std::vector<std::normal_distribution<double>> noise(n, std::normal_distribution<double>(cfg.temp_mean, cfg.temp_sigma));

  std::vector<detail::CiNode> node(n);
  for (NodeId v = 0; v < n; ++v)
    for (NodeId w : topo.adjacency[v])
      node[v].tables.two_hop[w] = std::set<NodeId>(topo.adjacency[w].begin(), topo.adjacency[w].end());

  // Compromised nodes claim the true process mean shifted by the offset.
  auto reported = [&](NodeId v) {
    GaussianEstimate e = node[v].global;
    if (run.faults.contains(v)) e.mean = cfg.temp_mean + offset;
    return e;
  };
  auto reported_origin = [&](NodeId v) { return run.faults.contains(v) ? v : node[v].origin; };

  // Latest local observation as a neighbor reports it in a reply.
  auto observation = [&](NodeId v) {
    return GaussianEstimate{run.faults.contains(v) ? cfg.temp_mean + offset : node[v].reading, var0};
  };

  // Suspect check by `det` on a broadcast from `src`. The query reaches
  // the detector's neighbors, the suspect included; each answers with its
  // latest sensing result. The suspect's answer is judged against the
  // others and the detector's own. Without the suspect's answer the verdict
  // stays `suspect`.
  auto investigate = [&](NodeId det, NodeId src) {
    std::vector<GaussianEstimate> replies{node[det].global};
    std::optional<GaussianEstimate> claim;
    std::vector<NodeId> responders;
    radio.broadcast(det, MsgType::query, [&](NodeId w) {
      if (!node[w].blocked.contains(det) && !node[det].blocked.contains(w)) responders.push_back(w);
    });
    for (NodeId w : responders)
      radio.broadcast(w, MsgType::reply, [&](NodeId r) {
        if (r != det) return;
        if (w == src)
          claim = observation(w);
        else
          replies.push_back(observation(w));
      });
    return claim ? ciagg::majority_verdict(*claim, replies, cfg.ci) : ciagg::Verdict::suspect;
  };

  // Blocks `target` and drops everything derived from its data. A global
  // estimate carrying its data is rebuilt from the own sample and the
  // remaining neighbor estimates.
  auto forget = [&](NodeId v, NodeId target) {
    auto& self = node[v];
    self.blocked.insert(target);
    self.tables.neighbors.erase(target);
    self.tables.two_hop.erase(target);
    for (auto& [_, set] : self.tables.two_hop) set.erase(target);
    for (auto it = self.table_origin.begin(); it != self.table_origin.end();) {
      if (it->first == target || it->second == target) {
        self.tables.neighbors.erase(it->first);
        it = self.table_origin.erase(it);
      } else {
        ++it;
      }
    }
    if (self.origin != target) return;
    self.global = {self.reading, var0};
    self.origin = v;
    for (const auto& [w, entry] : self.tables.neighbors) {
      const GaussianEstimate before = self.global;
      self.global = ciagg::ci_fuse(self.global, entry.estimate);
      if (!(self.global == before)) self.origin = self.table_origin[w];
    }
  };

  std::vector<std::vector<detail::CiMessage>> inbox(n), next(n);
  const std::uint32_t rounds = cfg.rounds();

  for (std::uint32_t round = 0; round < rounds; ++round) {
    // Sense and fuse.
    for (NodeId v = 0; v < n; ++v) {
      auto& self = node[v];
      if (!account_energy(EnergyEvent::sense, v, met.energy)) continue;
      const double reading = noise[v](sensor[v]);
      run.max_reading[v] = std::max(run.max_reading[v], reading);
      self.reading = reading;
      if (round == 0) {
        self.global = {reading, var0};
        self.origin = v;
        self.last_trigger = self.prev_local = reading;
        self.pending = true;
        continue;
      }
      if (std::abs(reading - self.last_trigger) <= cfg.change_trigger * std::abs(self.last_trigger)) continue;
      self.last_trigger = reading;
      const GaussianEstimate local{reading, var0};
      if (ciagg::plan_fusion(self.global, local, self.prev_local, cfg.ci).which == ciagg::FusionCase::local_dominant)
        self.origin = v;
      self.global = ciagg::fuse_local(self.global, local, self.prev_local, cfg.ci);
      self.prev_local = reading;
      if (ciagg::should_broadcast(reported(v), self.tables.neighbors, cfg.ci)) self.pending = true;
    }

    // Process last round's traffic against the fresh samples.
    for (NodeId v = 0; v < n; ++v) {
      auto& self = node[v];
      if (!met.energy.alive(v)) continue;
      for (const auto& msg : inbox[v]) {
        if (self.blocked.contains(msg.from)) continue;
        if (msg.type == MsgType::isolation) {
          if (!run.faults.contains(v) && msg.target != v) forget(v, msg.target);
          continue;
        }
        if (self.blocked.contains(msg.target)) continue;
        const bool detector = security_enabled && !run.faults.contains(v);
        if (detector && ciagg::classify_received(self.global, msg.estimate, cfg.ci) == ciagg::Verdict::suspect) {
          const ciagg::Verdict verdict = investigate(v, msg.from);
          if (verdict == ciagg::Verdict::suspect) continue;
          if (verdict == ciagg::Verdict::malicious) {
            ++run.malicious_verdicts;
            run.isolated[msg.from] = true;
            forget(v, msg.from);
            const NodeId target = msg.from;
            radio.broadcast(v, MsgType::isolation, [&](NodeId w) {
              next[w].push_back({v, MsgType::isolation, {}, target});
            });
            continue;
          }
        }
        self.tables.neighbors[msg.from] = {msg.estimate, round};
        self.table_origin[msg.from] = msg.target;
        const GaussianEstimate before = self.global;
        self.global = ciagg::ci_fuse(self.global, msg.estimate);
        const bool changed = !(self.global == before);
        if (changed) self.origin = msg.target;
        if (ciagg::suppress_rebroadcast(msg.from, v, changed, self.tables.two_hop) == ciagg::Rebroadcast::rebroadcast &&
            ciagg::should_broadcast(reported(v), self.tables.neighbors, cfg.ci))
          self.pending = true;
      }
      inbox[v].clear();
    }

    // Transmit.
    for (NodeId v = 0; v < n; ++v) {
      auto& self = node[v];
      if (!self.pending) continue;
      self.pending = false;
      const GaussianEstimate e = reported(v);
      const NodeId origin = reported_origin(v);
      radio.broadcast(v, MsgType::estimate, [&](NodeId w) { next[w].push_back({v, MsgType::estimate, e, origin}); });
    }
    std::swap(inbox, next);
    for (auto& q : next) q.clear();
  }

  run.estimates.resize(n);
  for (NodeId v = 0; v < n; ++v) run.estimates[v] = node[v].global;
  detail::fill_detection(run.detection, run.faults, run.isolated);
  return run;
}

// Both arms on the same deployment, readings and fault set.
inline DetectionMetrics run_ci_experiment(const SimConfig& cfg, double fault_fraction) {
  const CiRun with = run_ci_sim(cfg, fault_fraction, true);
  const CiRun without = run_ci_sim(cfg, fault_fraction, false);
  DetectionMetrics d = with.detection;
  d.energy_with_security = with.metrics.energy.total_spent();
  d.energy_without_security = without.metrics.energy.total_spent();
  d.delivery_ratio_with = with.metrics.delivery_ratio();
  d.delivery_ratio_without = without.metrics.delivery_ratio();
  return d;
}

}  // namespace wsnagg::netsim
