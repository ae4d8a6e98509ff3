#pragma once

// Experiment dispatch and CSV output for the `wsnagg` tool.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wsnagg/attack.hpp"
#include "wsnagg/cli/config.hpp"
#include "wsnagg/error.hpp"
#include "wsnagg/keydist.hpp"
#include "wsnagg/netsim/ci_sim.hpp"
#include "wsnagg/netsim/config.hpp"
#include "wsnagg/netsim/cpda_sim.hpp"

namespace wsnagg::cli {

enum class Subcommand { keydist, cpda, attack, ci_sim, overhead };

inline std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::keydist:
      return "keydist";
    case Subcommand::cpda:
      return "cpda";
    case Subcommand::attack:
      return "attack";
    case Subcommand::ci_sim:
      return "ci-sim";
    case Subcommand::overhead:
      return "overhead";
  }
  return "?";
}

struct RunSpec {
  Subcommand command = Subcommand::cpda;
  std::string config_path;         // empty: defaults
  std::string output_path = "-";  // "-": standard output
  std::optional<std::uint64_t> seed;
  unsigned repetitions = 1;
  std::optional<std::string> mode;

  void validate() const {
    if (repetitions < 1) throw ValidationError("reps", "must be >= 1");
    if (output_path.empty()) throw ValidationError("out", "must not be empty");
  }
};

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kProtocolAbort = 3 };

inline constexpr int kEmpiricalPairs = 10000;
inline constexpr int kAttackTrials = 100;

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fields, first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::vector<netsim::SimMode> resolve_modes(const RunSpec& spec, const ParsedConfig& cfg) {
  using netsim::SimMode;
  if (spec.mode) {
    if (*spec.mode == "all") return {SimMode::tag_plain, SimMode::original, SimMode::efficient, SimMode::hardened};
    try {
      return {netsim::parse_mode(*spec.mode)};
    } catch (const ConfigError&) {
      throw ValidationError("mode", "unknown mode '" + *spec.mode + "'");
    }
  }
  if (cfg.mode) return {*cfg.mode};
  return {SimMode::tag_plain, SimMode::original, SimMode::efficient, SimMode::hardened};
}

inline std::string ops_fields(const cpda::OpCounters& c) {
  std::ostringstream s;
  s << c.add << ',' << c.sub << ',' << c.mul << ',' << c.div << ',' << c.exp << ',' << c.enc << ',' << c.mat_mul << ','
    << c.mat_inv;
  return s.str();
}

inline double analytic_messages(netsim::SimMode mode, double p_c) {
  switch (mode) {
    case netsim::SimMode::tag_plain:
      return 2.0;
    case netsim::SimMode::original:
      return 3.0 + p_c;
    case netsim::SimMode::efficient:
      return 2.0 + p_c;
    case netsim::SimMode::hardened:
      return 5.0 + p_c;
  }
  return 0.0;
}

inline std::string keydist_csv(const netsim::SimConfig& c, unsigned reps, std::ostream& log) {
  Csv csv{"seed", "K", "k", "analytic_p_connect", "empirical_p_connect", "p_overhear"};
  const keydist::KeyPoolConfig pool{c.key_pool, c.key_ring};
  for (unsigned r = 0; r < reps; ++r) {
    const double analytic = keydist::connectivity_probability(pool);
    const double empirical = keydist::empirical_connectivity(pool, kEmpiricalPairs, c.seed);
    csv.row(c.seed, c.key_pool, c.key_ring, num(analytic), num(empirical), num(keydist::overhear_probability(pool)));
    if (r == 0)
      log << "keydist K=" << c.key_pool << " k=" << c.key_ring << ": p_connect " << num(analytic) << " (empirical "
          << num(empirical) << ")\n";
  }
  return csv.str();
}

inline std::string cpda_csv(netsim::SimConfig c, const std::vector<netsim::SimMode>& modes, unsigned reps,
                            std::ostream& log) {
  Csv csv{"seed",    "mode", "nodes", "clusters", "small_clusters", "aborted_clusters", "sink_aggregate",
          "true_aggregate", "exact", "avg_messages_per_node", "add", "sub", "mul", "div", "exp", "enc",
          "mat_mul", "mat_inv", "energy_spent", "delivery_ratio"};
  for (unsigned r = 0; r < reps; ++r)
    for (auto mode : modes) {
      const netsim::Metrics m = netsim::run_cpda_sim(c, mode);
      const bool exact = m.sink_aggregate == m.true_aggregate;
      csv.row(c.seed, netsim::to_string(mode), m.participant_count(), m.clusters, m.small_clusters,
              m.aborted_clusters, m.sink_aggregate.str(), m.true_aggregate.str(), exact ? 1 : 0,
              num(m.avg_schedule_messages_per_node()), ops_fields(m.ops), num(m.energy.total_spent()),
              num(m.delivery_ratio()));
      if (r == 0)
        log << "cpda " << netsim::to_string(mode) << ": sink " << m.sink_aggregate << (exact ? " (exact)" : " (MISMATCH)")
            << ", " << num(m.avg_schedule_messages_per_node()) << " msgs/node\n";
    }
  return csv.str();
}

inline std::string attack_csv(const netsim::SimConfig& c, std::optional<netsim::SimMode> mode, unsigned reps,
                              std::ostream& log) {
  const auto m = mode.value_or(netsim::SimMode::original);
  if (m != netsim::SimMode::original && m != netsim::SimMode::hardened)
    throw ValidationError("mode", "attack runs against 'original' or 'hardened' transcripts");
  Csv csv{"seed", "trial", "mode", "attacker", "victim1_true", "victim2_true", "victim1_recovered",
          "victim2_recovered", "success"};
  std::size_t successes = 0, total = 0;
  for (unsigned r = 0; r < reps; ++r)
    for (int trial = 0; trial < kAttackTrials; ++trial) {
      Rng rng(derive_seed(c.seed, 100 + static_cast<std::uint64_t>(trial)));
      for (auto role : {attack::Role::leader, attack::Role::member}) {
        const attack::Instance inst =
            m == netsim::SimMode::hardened
                ? attack::hardened_instance(rng, c.value_bound, c.seed_bound)
                : attack::original_instance(rng, role, c.value_bound, c.coeff_bound, c.seed_bound);
        const auto out = attack::run_attack(inst, role);
        const std::string v1 = out.recovered ? out.recovered->first.str() : "";
        const std::string v2 = out.recovered ? out.recovered->second.str() : "";
        csv.row(c.seed, trial, netsim::to_string(m), attack::to_string(role), out.truth.first.str(),
                out.truth.second.str(), v1, v2, out.success() ? 1 : 0);
        if (r == 0) {
          ++total;
          successes += out.success();
        }
      }
    }
  log << "attack " << netsim::to_string(m) << ": " << successes << "/" << total << " trials recovered both values\n";
  return csv.str();
}

inline std::string ci_csv(const netsim::SimConfig& c, unsigned reps, std::ostream& log) {
  if (!(c.fault_fraction < 1.0)) throw ValidationError("fault_fraction", "must lie in [0, 1) for ci-sim");
  Csv csv{"seed", "fault_fraction", "compromised", "tp", "fp", "tn", "fn", "detection_rate", "fp_rate", "fn_rate",
          "energy_with_security", "energy_without_security", "energy_increase_pct", "delivery_ratio_with",
          "delivery_ratio_without"};
  for (unsigned r = 0; r < reps; ++r) {
    const auto d = netsim::run_ci_experiment(c, c.fault_fraction);
    csv.row(c.seed, num(c.fault_fraction), d.compromised, d.true_positive, d.false_positive, d.true_negative,
            d.false_negative, num(d.detection_rate), num(d.fp_rate), num(d.fn_rate), num(d.energy_with_security),
            num(d.energy_without_security), num(d.energy_increase_pct()), num(d.delivery_ratio_with),
            num(d.delivery_ratio_without));
    if (r == 0)
      log << "ci-sim: detection " << num(d.detection_rate) << ", fp " << num(d.fp_rate) << ", energy +"
          << num(d.energy_increase_pct()) << "%\n";
  }
  return csv.str();
}

// Hardened rows are the worst case: every node proposes an abnormal seed once.
inline std::string overhead_csv(netsim::SimConfig c, const std::vector<netsim::SimMode>& modes, unsigned reps,
                                std::ostream& log) {
  Csv csv{"seed", "mode", "p_c", "avg_messages_per_node", "analytic"};
  for (unsigned r = 0; r < reps; ++r)
    for (auto mode : modes) {
      netsim::SimConfig run = c;
      if (mode == netsim::SimMode::hardened) {
        run.fault_fraction = 1.0;
        run.persistent_abnormal = false;
      }
      const double avg = netsim::run_cpda_sim(run, mode).avg_schedule_messages_per_node();
      const double analytic = analytic_messages(mode, c.leader_probability);
      csv.row(c.seed, netsim::to_string(mode), num(c.leader_probability), num(avg), num(analytic));
      if (r == 0) log << "overhead " << netsim::to_string(mode) << ": " << num(avg) << " vs " << num(analytic) << "\n";
    }
  return csv.str();
}

}  // namespace detail

// Produces the CSV text for a spec; throws on configuration or protocol errors.
inline std::string run_to_csv(const RunSpec& spec, std::ostream& log) {
  spec.validate();
  ParsedConfig cfg = spec.config_path.empty() ? ParsedConfig{} : parse_config(spec.config_path);
  if (spec.seed) cfg.sim.seed = *spec.seed;
  cfg.sim.validate();
  const auto& c = cfg.sim;
  switch (spec.command) {
    case Subcommand::keydist:
      return detail::keydist_csv(c, spec.repetitions, log);
    case Subcommand::cpda:
      return detail::cpda_csv(c, detail::resolve_modes(spec, cfg), spec.repetitions, log);
    case Subcommand::attack: {
      std::optional<netsim::SimMode> m = cfg.mode;
      if (spec.mode) m = detail::resolve_modes(spec, cfg).front();
      return detail::attack_csv(c, m, spec.repetitions, log);
    }
    case Subcommand::ci_sim:
      return detail::ci_csv(c, spec.repetitions, log);
    case Subcommand::overhead:
      return detail::overhead_csv(c, detail::resolve_modes(spec, cfg), spec.repetitions, log);
  }
  throw Error("unknown subcommand");
}

// Runs the experiment, writes the CSV and maps failures to exit codes.
inline int run(const RunSpec& spec, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    const std::string csv = run_to_csv(spec, log);
    if (spec.output_path == "-") {
      std::cout << csv;
    } else {
      std::ofstream f(spec.output_path, std::ios::binary);
      if (!f) throw Error("cannot write '" + spec.output_path + "'");
      f << csv;
      if (!f) throw Error("write failed for '" + spec.output_path + "'");
    }
    return kOk;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ProtocolAbort& e) {
    err << "protocol abort (" << e.check() << "): " << e.what() << '\n';
    return kProtocolAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace wsnagg::cli
