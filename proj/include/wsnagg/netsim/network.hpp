#pragma once

// Energy ledger, message accounting and the broadcast radio shared by the
// CPDA and CI simulations.

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/cpda.hpp"
#include "wsnagg/netsim/config.hpp"
#include "wsnagg/netsim/topology.hpp"

namespace wsnagg::netsim {

enum class EnergyEvent { tx, rx, sense };

struct EnergyLedger {
  double e_tx = 0, e_rx = 0, e_sense = 0;
  double initial = 0;
  std::vector<double> remaining;
  std::vector<bool> exhausted;
  std::array<std::uint64_t, 3> events{};  // performed tx / rx / sense

  EnergyLedger() = default;
  EnergyLedger(const SimConfig& cfg, std::size_t nodes)
      : e_tx(cfg.e_tx()),
        e_rx(cfg.e_rx()),
        e_sense(cfg.e_sense()),
        initial(cfg.initial_energy),
        remaining(nodes, cfg.initial_energy),
        exhausted(nodes, false) {}

  bool alive(NodeId n) const { return !exhausted[n] && remaining[n] > 0.0; }

  double cost(EnergyEvent e) const {
    switch (e) {
      case EnergyEvent::tx:
        return e_tx;
      case EnergyEvent::rx:
        return e_rx;
      case EnergyEvent::sense:
        return e_sense;
    }
    return 0.0;
  }

  double total_spent() const {
    return static_cast<double>(events[0]) * e_tx + static_cast<double>(events[1]) * e_rx +
           static_cast<double>(events[2]) * e_sense;
  }
};

// Deducts the event's cost. A node that cannot afford an event is marked
// exhausted, the event does not happen, and the node stops participating.
inline bool account_energy(EnergyEvent event, NodeId node, EnergyLedger& ledger) {
  if (!ledger.alive(node)) return false;
  const double c = ledger.cost(event);
  if (ledger.remaining[node] < c) {
    ledger.exhausted[node] = true;
    return false;
  }
  ledger.remaining[node] -= c;
  ++ledger.events[static_cast<std::size_t>(event)];
  if (ledger.remaining[node] <= 0.0) ledger.exhausted[node] = true;
  return true;
}

enum class MsgType : std::size_t {
  hello,
  join,
  seed,
  shares,
  f_value,
  aggregate,
  tag_data,
  validation,
  relay,
  estimate,
  query,
  reply,
  isolation,
  count_
};

inline constexpr std::size_t kMsgTypes = static_cast<std::size_t>(MsgType::count_);

inline std::string_view to_string(MsgType t) {
  static constexpr std::array<std::string_view, kMsgTypes> names{
      "hello", "join", "seed", "shares", "f_value", "aggregate", "tag_data",
      "validation", "relay", "estimate", "query", "reply", "isolation"};
  return names[static_cast<std::size_t>(t)];
}

// Message types of the per-node CPDA / TAG schedule. JOINs and multi-hop
// relays are tracked but sit outside the schedule.
inline bool in_schedule(MsgType t) {
  switch (t) {
    case MsgType::hello:
    case MsgType::seed:
    case MsgType::shares:
    case MsgType::f_value:
    case MsgType::aggregate:
    case MsgType::tag_data:
    case MsgType::validation:
      return true;
    default:
      return false;
  }
}

struct MessageStats {
  std::uint64_t transmitted = 0;  // radio transmissions
  std::uint64_t addressed = 0;    // per-receiver copies
  std::uint64_t received = 0;
  std::uint64_t lost = 0;

  bool operator==(const MessageStats&) const = default;
};

using PerNodeCounts = std::array<std::uint64_t, kMsgTypes>;

struct Metrics {
  std::vector<PerNodeCounts> sent_by_node;
  std::vector<PerNodeCounts> received_by_node;
  std::array<MessageStats, kMsgTypes> by_type{};
  cpda::OpCounters ops;
  EnergyLedger energy;
  std::vector<bool> participating;

  BigInt sink_aggregate = 0;
  BigInt true_aggregate = 0;

  bool disconnected = false;
  std::size_t clusters = 0;
  std::size_t leaders = 0;
  std::size_t small_clusters = 0;  // aggregated in plaintext
  std::size_t aborted_clusters = 0;
  std::size_t validation_rounds = 0;
  std::size_t unreachable_leaders = 0;
  std::size_t synthetic_pair_keys = 0;

  std::size_t participant_count() const {
    return static_cast<std::size_t>(std::count(participating.begin(), participating.end(), true));
  }

  double delivery_ratio() const {
    std::uint64_t addr = 0, recv = 0;
    for (const auto& s : by_type) {
      addr += s.addressed;
      recv += s.received;
    }
    return addr == 0 ? 1.0 : static_cast<double>(recv) / static_cast<double>(addr);
  }

  std::uint64_t total_transmitted() const {
    std::uint64_t t = 0;
    for (const auto& s : by_type) t += s.transmitted;
    return t;
  }

  // Mean over participating nodes of schedule messages sent.
  double avg_schedule_messages_per_node() const {
    std::uint64_t total = 0;
    std::size_t nodes = 0;
    for (std::size_t n = 0; n < sent_by_node.size(); ++n) {
      if (!participating[n]) continue;
      ++nodes;
      for (std::size_t t = 0; t < kMsgTypes; ++t)
        if (in_schedule(static_cast<MsgType>(t))) total += sent_by_node[n][t];
    }
    return nodes == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(nodes);
  }
};

// Local broadcast over the radio: every live neighbor is a receiver; each
// copy is lost independently with probability `loss`.
class Radio {
 public:
  Radio(const Topology& topo, double loss, Metrics& metrics, std::uint64_t loss_seed)
      : topo_(topo), loss_(loss), metrics_(metrics), rng_(loss_seed) {}

  // Calls `deliver` for each neighbor that received the message. Returns
  // false when the sender could not afford the transmission.
  template <class Deliver>
  bool broadcast(NodeId from, MsgType type, Deliver&& deliver) {
    if (!account_energy(EnergyEvent::tx, from, metrics_.energy)) return false;
    const auto t = static_cast<std::size_t>(type);
    ++metrics_.sent_by_node[from][t];
    auto& stats = metrics_.by_type[t];
    ++stats.transmitted;
    for (NodeId v : topo_.adjacency[from]) {
      if (!metrics_.energy.alive(v)) continue;
      ++stats.addressed;
      if (loss_ > 0.0 && std::bernoulli_distribution(loss_)(rng_)) {
        ++stats.lost;
        continue;
      }
      if (!account_energy(EnergyEvent::rx, v, metrics_.energy)) {
        ++stats.lost;
        continue;
      }
      ++stats.received;
      ++metrics_.received_by_node[v][t];
      deliver(v);
    }
    return true;
  }

  bool broadcast(NodeId from, MsgType type) {
    return broadcast(from, type, [](NodeId) {});
  }

 private:
  const Topology& topo_;
  double loss_;
  Metrics& metrics_;
  Rng rng_;
};

inline Metrics make_metrics(const SimConfig& cfg, const Topology& topo) {
  Metrics m;
  m.sent_by_node.assign(topo.size(), PerNodeCounts{});
  m.received_by_node.assign(topo.size(), PerNodeCounts{});
  m.energy = EnergyLedger(cfg, topo.size());
  m.participating = topo.in_sink_component;
  m.disconnected = !topo.connected;
  return m;
}

}  // namespace wsnagg::netsim
