#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "wsnagg/ciagg.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::netsim {

enum class SimMode { tag_plain, original, efficient, hardened };

inline std::string_view to_string(SimMode m) {
  switch (m) {
    case SimMode::tag_plain:
      return "tag_plain";
    case SimMode::original:
      return "original";
    case SimMode::efficient:
      return "efficient";
    case SimMode::hardened:
      return "hardened";
  }
  return "?";
}

inline SimMode parse_mode(std::string_view s) {
  if (s == "tag_plain" || s == "tag") return SimMode::tag_plain;
  if (s == "original") return SimMode::original;
  if (s == "efficient") return SimMode::efficient;
  if (s == "hardened") return SimMode::hardened;
  throw ConfigError("unknown mode '" + std::string(s) + "'");
}

// Defaults follow the reference deployment: 160 stationary nodes uniformly
// placed on 120 m x 120 m, 15 m radio range, 200 s at a 0.5 s sampling
// period, 5 J per node, 0.75 W transmit / 0.25 mW receive / 10 mW sensing.
struct SimConfig {
  std::uint32_t node_count = 160;
  double area_side = 120.0;      // m
  double radio_range = 15.0;     // m
  double sim_time = 200.0;       // s
  double sampling_period = 0.5;  // s
  double initial_energy = 5.0;   // J
  double tx_power = 0.75;        // W
  double rx_power = 0.25e-3;     // W
  double sense_power = 10e-3;    // W
  double airtime = 0.001;        // s per message
  double leader_probability = 0.1;
  double change_trigger = 0.02;
  double temp_mean = 25.0;
  double temp_sigma = 1.0;
  double link_loss = 0.0;
  std::uint64_t seed = 1;

  SimMode mode = SimMode::original;
  // CPDA: fraction of nodes proposing abnormal seeds (hardened mode).
  // CI: fraction of compromised nodes.
  double fault_fraction = 0.0;
  double fault_offset_sigmas = 10.0;
  // Abnormal CPDA nodes keep misbehaving after a validation round.
  bool persistent_abnormal = false;

  std::uint64_t key_pool = 1000;    // K
  std::uint64_t key_ring = 50;      // k
  std::uint64_t value_bound = 1000; // D
  std::uint64_t coeff_bound = 1000; // R
  std::uint64_t seed_bound = 1000;  // public seeds drawn from [1, seed_bound)

  ciagg::CiConfig ci;

  double e_tx() const { return tx_power * airtime; }
  double e_rx() const { return rx_power * airtime; }
  double e_sense() const { return sense_power * sampling_period; }
  std::uint32_t rounds() const { return static_cast<std::uint32_t>(std::lround(sim_time / sampling_period)); }

  void validate() const {
    auto positive = [](const char* key, double v) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(key, "must be positive");
    };
    if (node_count < 1) throw ValidationError("node_count", "must be >= 1");
    positive("area_side", area_side);
    positive("radio_range", radio_range);
    positive("sim_time", sim_time);
    positive("sampling_period", sampling_period);
    positive("initial_energy", initial_energy);
    positive("tx_power", tx_power);
    positive("rx_power", rx_power);
    positive("sense_power", sense_power);
    positive("airtime", airtime);
    positive("change_trigger", change_trigger);
    positive("temp_sigma", temp_sigma);
    positive("fault_offset_sigmas", fault_offset_sigmas);
    if (!std::isfinite(temp_mean)) throw ValidationError("temp_mean", "must be finite");
    if (!(leader_probability >= 0.0 && leader_probability <= 1.0))
      throw ValidationError("p_c", "must lie in [0, 1]");
    if (!(link_loss >= 0.0 && link_loss < 1.0)) throw ValidationError("link_loss", "must lie in [0, 1)");
    if (!(fault_fraction >= 0.0 && fault_fraction <= 1.0))
      throw ValidationError("fault_fraction", "must lie in [0, 1]");
    if (key_pool < 1) throw ValidationError("K", "must be >= 1");
    if (key_ring < 1 || key_ring > key_pool) throw ValidationError("k", "must lie in [1, K]");
    if (value_bound < 1) throw ValidationError("D", "must be >= 1");
    if (coeff_bound < 2) throw ValidationError("R", "must be >= 2");
    if (seed_bound < 4) throw ValidationError("seed_bound", "must be >= 4");
    if (!(ci.broadcast_threshold > 0)) throw ValidationError("broadcast_threshold", "must be positive");
    if (!(ci.fall_threshold > 0)) throw ValidationError("fall_threshold", "must be positive");
    if (!(ci.detection_multiplier > 0)) throw ValidationError("detection_multiplier", "must be positive");
    ci.validate();
  }
};

}  // namespace wsnagg::netsim
