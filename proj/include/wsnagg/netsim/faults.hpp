#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::netsim {

struct FaultSet {
  std::vector<bool> compromised;
  double offset_sigmas = 0.0;

  std::size_t count() const { return static_cast<std::size_t>(std::count(compromised.begin(), compromised.end(), true)); }
  bool contains(NodeId v) const { return v < compromised.size() && compromised[v]; }
};

// Uniformly chosen floor(fraction * N) nodes out of `candidates`.
inline FaultSet inject_faults(const std::vector<NodeId>& candidates, std::size_t node_count, double fraction,
                              double offset_sigmas, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw DomainError("fault fraction must lie in [0, 1)");
  FaultSet out;
  out.offset_sigmas = offset_sigmas;
  out.compromised.assign(node_count, false);
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(candidates.size()) + 1e-9));
  std::vector<NodeId> pool = candidates;
  Rng rng(derive_seed(seed, 3));
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t i = 0; i < k; ++i) out.compromised[pool[i]] = true;
  return out;
}

inline FaultSet inject_faults(std::size_t node_count, double fraction, double offset_sigmas, std::uint64_t seed) {
  std::vector<NodeId> all(node_count);
  std::iota(all.begin(), all.end(), NodeId{0});
  return inject_faults(all, node_count, fraction, offset_sigmas, seed);
}

}  // namespace wsnagg::netsim
