#pragma once

// Secure max-aggregation by distributed estimation: covariance-intersection
// fusion of scalar Gaussian estimates, step-weighted fusion of a local
// reading into the global estimate, threshold-gated broadcast with two-hop
// suppression, and 3-sigma suspect detection confirmed by neighbor majority.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::ciagg {

struct GaussianEstimate {
  double mean = 0.0;
  double variance = 1.0;

  double stddev() const { return std::sqrt(variance); }
  bool operator==(const GaussianEstimate&) const = default;
};

inline void require_positive_variance(const GaussianEstimate& e) {
  if (!(e.variance > 0.0) || !std::isfinite(e.mean)) throw DomainError("estimate needs finite mean and variance > 0");
}

struct CiConfig {
  double broadcast_threshold = 0.5;  // T, in units of the mean
  double fall_threshold = 1.0;
  double detection_multiplier = 3.0;
  int grid_points = 2048;
  double grid_span_sigmas = 4.0;

  void validate() const {
    if (!(broadcast_threshold > 0) || !(fall_threshold > 0) || !(detection_multiplier > 0) || grid_points < 2 ||
        !(grid_span_sigmas > 0))
      throw ConfigError("CI parameters must be positive");
  }
};

// ---------------------------------------------------------------------------
// Covariance intersection

// Scalar CI: the variance-minimizing omega is 1 (keep a) or 0 (keep b).
// Equal variances keep a.
inline double ci_omega(const GaussianEstimate& a, const GaussianEstimate& b) {
  require_positive_variance(a);
  require_positive_variance(b);
  return a.variance <= b.variance ? 1.0 : 0.0;
}

// General CI combination for a given omega in [0, 1].
inline GaussianEstimate ci_combine(const GaussianEstimate& a, const GaussianEstimate& b, double omega) {
  require_positive_variance(a);
  require_positive_variance(b);
  if (omega < 0.0 || omega > 1.0) throw DomainError("omega must lie in [0, 1]");
  const double info = omega / a.variance + (1.0 - omega) / b.variance;
  const double p = 1.0 / info;
  return {p * (omega / a.variance * a.mean + (1.0 - omega) / b.variance * b.mean), p};
}

inline GaussianEstimate ci_fuse(const GaussianEstimate& a, const GaussianEstimate& b) {
  return ci_omega(a, b) == 1.0 ? a : b;
}

// ---------------------------------------------------------------------------
// Local / global fusion

inline constexpr double kSupportSigmas = 3.0;
inline constexpr int kMaxGridPoints = 1 << 20;

inline int step_weight_w1(double t, const GaussianEstimate& local) {
  return t <= local.mean - kSupportSigmas * local.stddev() ? 0 : 1;
}

inline int step_weight_w2(double t, const GaussianEstimate& local, const GaussianEstimate& global) {
  const double cut =
      std::max(local.mean - kSupportSigmas * local.stddev(), global.mean - kSupportSigmas * global.stddev());
  return t <= cut ? 0 : 1;
}

namespace detail {

struct Moments {
  double m0 = 0, m1 = 0, m2 = 0;  // about `center`
};

// Trapezoid moments of N(mean, var) over [a, b] using `n` nodes. The density
// is evaluated by a multiplicative recurrence running outward from the node
// nearest the mean, so far tails decay to zero without overflow.
inline void add_gaussian_moments(Moments& acc, const GaussianEstimate& g, double a, double b, int n, double center) {
  if (!(b > a)) return;
  const double sigma = g.stddev();
  const double h = (b - a) / (n - 1);
  const double delta = h / sigma;
  const double q = std::exp(-delta * delta);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));

  std::vector<double> p(static_cast<std::size_t>(n));
  const long peak = std::clamp(std::lround((g.mean - a) / h), 0L, static_cast<long>(n - 1));
  const double zp = (a + peak * h - g.mean) / sigma;
  p[peak] = std::exp(-0.5 * zp * zp);
  double r = std::exp(-zp * delta - 0.5 * delta * delta);
  for (long k = peak; k + 1 < n; ++k) {
    p[k + 1] = p[k] * r;
    r *= q;
  }
  double s = std::exp(zp * delta - 0.5 * delta * delta);
  for (long k = peak; k > 0; --k) {
    p[k - 1] = p[k] * s;
    s *= q;
  }

  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 || k == n - 1) ? 0.5 * h : h;
    const double u = a + k * h - center;
    const double f = w * norm * p[k];
    acc.m0 += f;
    acc.m1 += f * u;
    acc.m2 += f * u * u;
  }
}

}  // namespace detail

// Which reading of the weighted mixture a fusion used.
enum class FusionCase { local_dominant, global_dominant };

struct FusionPlan {
  FusionCase which;
  GaussianEstimate base;      // weight 1 everywhere
  GaussianEstimate weighted;  // weight 1 only above `cutoff`
  double cutoff;
};

inline FusionPlan plan_fusion(const GaussianEstimate& global, const GaussianEstimate& local, double prev_local_mean,
                              const CiConfig& cfg) {
  const bool local_case = local.mean >= global.mean || std::abs(global.mean - prev_local_mean) <= cfg.fall_threshold;
  if (local_case) return {FusionCase::local_dominant, local, global, local.mean - kSupportSigmas * local.stddev()};
  const double cut =
      std::max(local.mean - kSupportSigmas * local.stddev(), global.mean - kSupportSigmas * global.stddev());
  return {FusionCase::global_dominant, global, local, cut};
}

// Moment-matched Gaussian of m(t) ∝ base(t) + 1[t > cutoff]·weighted(t),
// integrated by the trapezoid rule over
// [min mean - span·σmax, max mean + span·σmax].
inline GaussianEstimate fuse_local(const GaussianEstimate& global, const GaussianEstimate& local,
                                   double prev_local_mean, const CiConfig& cfg) {
  require_positive_variance(global);
  require_positive_variance(local);
  const FusionPlan plan = plan_fusion(global, local, prev_local_mean, cfg);
  const double sigma_max = std::max(global.stddev(), local.stddev());
  const double lo = std::min(global.mean, local.mean) - cfg.grid_span_sigmas * sigma_max;
  const double hi = std::max(global.mean, local.mean) + cfg.grid_span_sigmas * sigma_max;
  const double center = plan.base.mean;

  // At least grid_points nodes per component, refined so the step stays
  // below an eighth of that component's standard deviation.
  auto nodes = [&](const GaussianEstimate& g, double a) {
    const double need = std::ceil(8.0 * (hi - a) / g.stddev()) + 1.0;
    return static_cast<int>(std::clamp(need, static_cast<double>(cfg.grid_points), static_cast<double>(kMaxGridPoints)));
  };
  const double cut = std::max(plan.cutoff, lo);
  detail::Moments mom;
  detail::add_gaussian_moments(mom, plan.base, lo, hi, nodes(plan.base, lo), center);
  detail::add_gaussian_moments(mom, plan.weighted, cut, hi, nodes(plan.weighted, cut), center);
  if (!(mom.m0 > 0.0)) throw Error("fusion mixture has no mass");

  const double mu = mom.m1 / mom.m0;
  const double var = mom.m2 / mom.m0 - mu * mu;
  return {center + mu, var};
}

// ---------------------------------------------------------------------------
// Communication optimization

struct NeighborEntry {
  GaussianEstimate estimate;
  std::uint64_t round = 0;
};

using NeighborTable = std::map<NodeId, NeighborEntry>;

// Own neighbors (keys) and each one's neighbor set.
using TwoHopTable = std::map<NodeId, std::set<NodeId>>;

inline bool should_broadcast(const GaussianEstimate& fresh, const NeighborTable& table, const CiConfig& cfg) {
  return std::any_of(table.begin(), table.end(), [&](const auto& kv) {
    return std::abs(fresh.mean - kv.second.estimate.mean) > cfg.broadcast_threshold;
  });
}

enum class Rebroadcast { rebroadcast, suppress };

// After processing a broadcast from `origin`: rebroadcast only if the own
// estimate changed and some neighbor of ours did not hear `origin`.
inline Rebroadcast suppress_rebroadcast(NodeId origin, NodeId self, bool changed, const TwoHopTable& two_hop) {
  if (!changed) return Rebroadcast::suppress;
  static const std::set<NodeId> empty;
  auto it = two_hop.find(origin);
  const std::set<NodeId>& covered = it == two_hop.end() ? empty : it->second;
  for (const auto& [n, _] : two_hop) {
    if (n == origin || n == self) continue;
    if (!covered.contains(n)) return Rebroadcast::rebroadcast;
  }
  return Rebroadcast::suppress;
}

// ---------------------------------------------------------------------------
// Detection

enum class Verdict { normal, suspect, malicious };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::normal:
      return "normal";
    case Verdict::suspect:
      return "suspect";
    case Verdict::malicious:
      return "malicious";
  }
  return "?";
}

// Judged against the receiver's own standard deviation; strict.
inline Verdict classify_received(const GaussianEstimate& own, const GaussianEstimate& received, const CiConfig& cfg) {
  require_positive_variance(own);
  return std::abs(received.mean - own.mean) > cfg.detection_multiplier * own.stddev() ? Verdict::suspect
                                                                                       : Verdict::normal;
}

// Malicious iff a strict majority of replies deviate from the suspect by more
// than multiplier times the replier's own standard deviation. The detector's
// own estimate is expected among the replies.
inline Verdict majority_verdict(const GaussianEstimate& suspect, std::span<const GaussianEstimate> replies,
                                const CiConfig& cfg) {
  if (replies.empty()) return Verdict::suspect;
  std::size_t deviating = 0;
  for (const auto& r : replies)
    if (std::abs(suspect.mean - r.mean) > cfg.detection_multiplier * r.stddev()) ++deviating;
  return 2 * deviating > replies.size() ? Verdict::malicious : Verdict::normal;
}

// normal -> suspect -> {normal | malicious}; malicious is terminal.
class VerdictState {
 public:
  Verdict current() const noexcept { return state_; }

  void transition(Verdict next) {
    if (next == state_) return;
    const bool ok = (state_ == Verdict::normal && next == Verdict::suspect) ||
                    (state_ == Verdict::suspect && (next == Verdict::normal || next == Verdict::malicious));
    if (!ok)
      throw Error("illegal verdict transition " + std::string(to_string(state_)) + " -> " +
                  std::string(to_string(next)));
    state_ = next;
  }

 private:
  Verdict state_ = Verdict::normal;
};

struct NodeTables {
  NeighborTable neighbors;
  TwoHopTable two_hop;
};

using NeighborhoodTables = std::map<NodeId, NodeTables>;

// Removes `node` everywhere. Returns whether anything changed.
inline bool isolate(NodeId node, NeighborhoodTables& tables) {
  bool changed = false;
  for (auto& [id, t] : tables) {
    changed |= t.neighbors.erase(node) > 0;
    changed |= t.two_hop.erase(node) > 0;
    for (auto& [_, set] : t.two_hop) changed |= set.erase(node) > 0;
  }
  return changed;
}

}  // namespace wsnagg::ciagg
