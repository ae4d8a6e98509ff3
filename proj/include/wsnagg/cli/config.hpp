#pragma once

// Flat `key = value` experiment files. `#` starts a comment, `[section]`
// headers are accepted and ignored, keys may appear once.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "wsnagg/error.hpp"
#include "wsnagg/netsim/config.hpp"

namespace wsnagg::cli {

struct ParsedConfig {
  netsim::SimConfig sim;
  std::optional<netsim::SimMode> mode;  // set only when the file names one
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(std::string_view v, std::size_t line) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ParseError(line, "not a number: '" + std::string(v) + "'");
  return out;
}

// Integers are range-checked by the caller so that "-1" reports the key.
inline long long parse_integer(std::string_view v, std::size_t line) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ParseError(line, "not an integer: '" + std::string(v) + "'");
  return out;
}

template <class T>
T non_negative(const char* key, long long v) {
  if (v < 0) throw ValidationError(key, "must be non-negative");
  return static_cast<T>(v);
}

}  // namespace detail

inline ParsedConfig parse_config_text(std::string_view text) {
  ParsedConfig out;
  netsim::SimConfig& c = out.sim;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(line_no, "malformed section header");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");
    if (val.empty()) throw ParseError(line_no, "missing value for '" + key + "'");
    if (!seen.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");

    auto real = [&] { return detail::parse_real(val, line_no); };
    auto integer = [&] { return detail::parse_integer(val, line_no); };

    if (key == "node_count") {
      const long long v = integer();
      if (v < 1 || v > 100000) throw ValidationError(key, "must lie in [1, 100000]");
      c.node_count = static_cast<std::uint32_t>(v);
    } else if (key == "area_side") {
      c.area_side = real();
    } else if (key == "radio_range") {
      c.radio_range = real();
    } else if (key == "sim_time") {
      c.sim_time = real();
    } else if (key == "sampling_period") {
      c.sampling_period = real();
    } else if (key == "initial_energy") {
      c.initial_energy = real();
    } else if (key == "airtime") {
      c.airtime = real();
    } else if (key == "p_c") {
      c.leader_probability = real();
    } else if (key == "change_trigger") {
      c.change_trigger = real();
    } else if (key == "temp_mean") {
      c.temp_mean = real();
    } else if (key == "temp_sigma") {
      c.temp_sigma = real();
    } else if (key == "link_loss") {
      c.link_loss = real();
    } else if (key == "seed") {
      c.seed = detail::non_negative<std::uint64_t>("seed", integer());
    } else if (key == "mode") {
      try {
        out.mode = netsim::parse_mode(val);
      } catch (const ConfigError&) {
        throw ValidationError(key, "unknown mode '" + std::string(val) + "'");
      }
      c.mode = *out.mode;
    } else if (key == "fault_fraction") {
      c.fault_fraction = real();
    } else if (key == "fault_offset_sigmas") {
      c.fault_offset_sigmas = real();
    } else if (key == "K") {
      c.key_pool = detail::non_negative<std::uint64_t>("K", integer());
    } else if (key == "k") {
      c.key_ring = detail::non_negative<std::uint64_t>("k", integer());
    } else if (key == "D") {
      c.value_bound = detail::non_negative<std::uint64_t>("D", integer());
    } else if (key == "R") {
      c.coeff_bound = detail::non_negative<std::uint64_t>("R", integer());
    } else if (key == "broadcast_threshold") {
      c.ci.broadcast_threshold = real();
    } else if (key == "fall_threshold") {
      c.ci.fall_threshold = real();
    } else if (key == "detection_multiplier") {
      c.ci.detection_multiplier = real();
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }
  c.validate();
  return out;
}

inline ParsedConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace wsnagg::cli
