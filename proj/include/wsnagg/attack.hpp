#pragma once

// Insider attacks on original CPDA for a three-node cluster A (leader), B, C.
// Each attack is a pure function of what one insider observes; none of them
// touches protocol state.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/cpda.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::attack {

struct LeaderView {
  cpda::NodeSecret own;  // a, r1^A, r2^A
  BigInt x;              // leader's seed
  BigInt y, z;           // public seeds of B and C
  BigInt v_from_b;       // v_A^B
  BigInt v_from_c;       // v_A^C
  BigInt f_b, f_c;
};

struct MemberView {
  cpda::NodeSecret own;  // b, r1^B, r2^B
  BigInt y;              // attacker's seed
  BigInt x, z;
  BigInt v_from_a;  // A's share at y
  BigInt v_from_c;  // C's share at y
  BigInt f_b;
};

// Base-`seed` split v = constant + linear*seed + quadratic*seed^2 by floor
// division; matches (value, r1, r2) only when the seed dominates.
struct Digits {
  BigInt constant, linear, quadratic;
};

inline Digits split_by_seed(const BigInt& v, const BigInt& seed) {
  const BigInt sq = seed * seed;
  Digits d;
  d.quadratic = floor_div(v, sq);
  const BigInt rest = v - d.quadratic * sq;
  d.linear = floor_div(rest, seed);
  d.constant = rest - d.linear * seed;
  return d;
}

// x = 2m(D + Rm): for any per-node share d + r1 x + r2 x^2 with d < mD and
// r1 < mR, d + r1 x < x^2, so the floor divisions are exact.
inline BigInt pick_malicious_seed(std::uint64_t value_bound, std::uint64_t coeff_bound, std::size_t m) {
  return BigInt(2) * m * (BigInt(value_bound) + BigInt(coeff_bound) * m);
}

using Recovered = std::pair<BigInt, BigInt>;

namespace detail {
inline BigInt residual_sum(const BigInt& f, const BigInt& seed, const BigInt& r1, const BigInt& r2) {
  return f - r1 * seed - r2 * seed * seed;
}
}  // namespace detail

// Malicious leader: recovers (b, c).
inline Recovered leader_attack(const LeaderView& v) {
  const Digits db = split_by_seed(v.v_from_b, v.x);
  const Digits dc = split_by_seed(v.v_from_c, v.x);
  const BigInt r1 = v.own.coefficients.at(0) + db.linear + dc.linear;
  const BigInt r2 = v.own.coefficients.at(1) + db.quadratic + dc.quadratic;

  const BigInt sum_y = detail::residual_sum(v.f_b, v.y, r1, r2);
  const BigInt sum_z = detail::residual_sum(v.f_c, v.z, r1, r2);
  if (sum_y != sum_z) throw AttackFailed("F_B and F_C disagree on the cluster sum");

  const BigInt b = db.constant;
  const BigInt c = sum_y - v.own.private_value - b;
  if (c != dc.constant || c < 0) throw AttackFailed("recovered values are inconsistent");
  return {b, c};
}

// Malicious member B: recovers (a, c).
inline Recovered member_attack(const MemberView& v) {
  const Digits total = split_by_seed(v.f_b, v.y);
  const Digits dc = split_by_seed(v.v_from_c, v.y);
  const BigInt r1a = total.linear - v.own.coefficients.at(0) - dc.linear;
  const BigInt r2a = total.quadratic - v.own.coefficients.at(1) - dc.quadratic;
  if (r1a < 0 || r2a < 0) throw AttackFailed("negative recovered coefficient");

  const BigInt a = v.v_from_a - r1a * v.y - r2a * v.y * v.y;
  if (a < 0) throw AttackFailed("negative recovered value");
  return {a, dc.constant};
}

// Member B against peers whose coefficients dwarf its own, using the
// unencrypted F_B and F_C: recovers (a, c).
inline Recovered large_coefficient_attack(const MemberView& v, const BigInt& f_c) {
  const Digits da = split_by_seed(v.v_from_a, v.y);
  const Digits dc = split_by_seed(v.v_from_c, v.y);
  const BigInt r1 = da.linear + v.own.coefficients.at(0) + dc.linear;
  const BigInt r2 = da.quadratic + v.own.coefficients.at(1) + dc.quadratic;

  const BigInt sum_y = detail::residual_sum(v.f_b, v.y, r1, r2);
  const BigInt sum_z = detail::residual_sum(f_c, v.z, r1, r2);
  if (sum_y != sum_z) throw AttackFailed("F_B and F_C disagree on the cluster sum");

  const BigInt a = da.constant;
  const BigInt c = sum_y - v.own.private_value - a;
  if (c != dc.constant || c < 0) throw AttackFailed("recovered values are inconsistent");
  return {a, c};
}

// Views of a recorded three-node transcript (positions 0 = A, 1 = B, 2 = C).
inline LeaderView leader_view(const cpda::Transcript& t, const cpda::NodeSecret& leader) {
  if (t.seeds.size() != 3) throw ArityError("attacks are defined for three-node clusters");
  return LeaderView{leader, t.seeds[0], t.seeds[1], t.seeds[2], t.shares[1][0], t.shares[2][0], t.f[1], t.f[2]};
}

inline MemberView member_view(const cpda::Transcript& t, const cpda::NodeSecret& member) {
  if (t.seeds.size() != 3) throw ArityError("attacks are defined for three-node clusters");
  return MemberView{member, t.seeds[1], t.seeds[0], t.seeds[2], t.shares[0][1], t.shares[2][1], t.f[1]};
}

// ---------------------------------------------------------------------------
// Trial instances

enum class Role { leader, member };

inline std::string_view to_string(Role r) { return r == Role::leader ? "leader" : "member"; }

struct Instance {
  std::vector<cpda::NodeSecret> secrets;  // A, B, C
  cpda::Transcript transcript;
};

// Honest secrets; the attacker (A as leader, B as member) announces the
// malicious seed, the other two seeds are drawn from [1, seed_bound).
inline Instance original_instance(Rng& rng, Role attacker, std::uint64_t value_bound, std::uint64_t coeff_bound,
                                  std::uint64_t seed_bound) {
  Instance out;
  for (int i = 0; i < 3; ++i) out.secrets.push_back(cpda::random_secret(rng, 3, value_bound, coeff_bound));
  const BigInt evil = pick_malicious_seed(value_bound, coeff_bound, 3);
  cpda::ClusterSeeds seeds;
  do {
    seeds = cpda::random_seeds(rng, 3, 1, seed_bound);
  } while (std::find(seeds.seeds.begin(), seeds.seeds.end(), evil) != seeds.seeds.end());
  seeds.seeds[attacker == Role::leader ? 0 : 1] = evil;
  out.transcript = cpda::record_transcript(out.secrets, seeds);
  return out;
}

// What the triangle checks still admit: seeds from [1, seed_bound) that pass
// validate_seeds, and every coefficient in [S, 2S) with S the largest seed.
inline Instance hardened_instance(Rng& rng, std::uint64_t value_bound, std::uint64_t seed_bound) {
  Instance out;
  cpda::ClusterSeeds seeds;
  do {
    seeds = cpda::random_seeds(rng, 3, 1, seed_bound);
  } while (!cpda::validate_seeds(seeds));
  const BigInt S = *std::max_element(seeds.seeds.begin(), seeds.seeds.end());
  const auto s = static_cast<std::uint64_t>(S);
  for (int i = 0; i < 3; ++i) {
    cpda::NodeSecret secret;
    secret.private_value = uniform_big(rng, 0, value_bound);
    for (int d = 0; d < 2; ++d) secret.coefficients.push_back(uniform_big(rng, s, 2 * s));
    out.secrets.push_back(std::move(secret));
  }
  out.transcript = cpda::record_transcript(out.secrets, seeds);
  return out;
}

struct AttackOutcome {
  Recovered truth;
  std::optional<Recovered> recovered;  // nullopt when the attack gave up

  bool success() const { return recovered && *recovered == truth; }
};

inline AttackOutcome run_attack(const Instance& inst, Role attacker) {
  AttackOutcome out;
  const auto& sec = inst.secrets;
  try {
    if (attacker == Role::leader) {
      out.truth = {sec[1].private_value, sec[2].private_value};
      out.recovered = leader_attack(leader_view(inst.transcript, sec[0]));
    } else {
      out.truth = {sec[0].private_value, sec[2].private_value};
      out.recovered = member_attack(member_view(inst.transcript, sec[1]));
    }
  } catch (const AttackFailed&) {
    out.recovered.reset();
  }
  return out;
}

}  // namespace wsnagg::attack
