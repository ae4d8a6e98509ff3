#pragma once

// Cluster-based private data aggregation: in-cluster share algebra, the
// pairwise-encrypted share exchange, recovery of the cluster sum, and the
// seed / share triangle validators. All share arithmetic is exact.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsnagg/common.hpp"
#include "wsnagg/error.hpp"

namespace wsnagg::cpda {

enum class Mode { original, efficient, hardened };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::original:
      return "original";
    case Mode::efficient:
      return "efficient";
    case Mode::hardened:
      return "hardened";
  }
  return "?";
}

struct ClusterSeeds {
  std::vector<BigInt> seeds;

  std::size_t size() const noexcept { return seeds.size(); }
  const BigInt& operator[](std::size_t i) const { return seeds[i]; }

  // Positive and distinct.
  void validate() const {
    std::set<BigInt> seen;
    for (const auto& s : seeds) {
      if (s < 1) throw ConfigError("public seeds must be positive");
      if (!seen.insert(s).second) throw ConfigError("public seeds must be distinct");
    }
  }
};

struct NodeSecret {
  BigInt private_value;
  std::vector<BigInt> coefficients;  // r_1 .. r_{m-1}
};

struct ShareVector {
  std::vector<BigInt> values;  // one per seed
};

struct FValue {
  std::size_t seed_index = 0;
  BigInt value;
};

// Operation tallies in the granularity used by the CPDA cost tables.
struct OpCounters {
  std::uint64_t add = 0;
  std::uint64_t sub = 0;
  std::uint64_t mul = 0;
  std::uint64_t div = 0;
  std::uint64_t exp = 0;
  std::uint64_t enc = 0;
  std::uint64_t mat_mul = 0;
  std::uint64_t mat_inv = 0;

  OpCounters& operator+=(const OpCounters& o) noexcept {
    add += o.add;
    sub += o.sub;
    mul += o.mul;
    div += o.div;
    exp += o.exp;
    enc += o.enc;
    mat_mul += o.mat_mul;
    mat_inv += o.mat_inv;
    return *this;
  }

  bool operator==(const OpCounters&) const = default;
};

inline OpCounters operator-(OpCounters a, const OpCounters& b) noexcept {
  a.add -= b.add;
  a.sub -= b.sub;
  a.mul -= b.mul;
  a.div -= b.div;
  a.exp -= b.exp;
  a.enc -= b.enc;
  a.mat_mul -= b.mat_mul;
  a.mat_inv -= b.mat_inv;
  return a;
}

// (sum, r_1, ..., r_{m-1}) recovered from F-values.
struct Recovery {
  BigInt sum;
  std::vector<BigInt> coefficient_sums;

  bool operator==(const Recovery&) const = default;
};

struct ClusterResult {
  BigInt recovered_sum;
  std::vector<BigInt> recovered_coefficient_sums;
  OpCounters counters;
  Mode mode = Mode::original;
};

// v = value + sum_i r_i * seed^i. Counts, per evaluation of a degree-d
// polynomial: d additions, d multiplications, d-1 exponentiations.
inline BigInt evaluate_share(const NodeSecret& secret, const BigInt& seed, OpCounters& counters) {
  BigInt v = secret.private_value;
  BigInt power = 1;
  const std::size_t degree = secret.coefficients.size();
  for (std::size_t i = 0; i < degree; ++i) {
    power *= seed;
    v += secret.coefficients[i] * power;
  }
  counters.add += degree;
  counters.mul += degree;
  counters.exp += degree > 0 ? degree - 1 : 0;
  return v;
}

inline ShareVector compute_shares(const NodeSecret& secret, const ClusterSeeds& seeds, OpCounters& counters) {
  ShareVector out;
  out.values.reserve(seeds.size());
  for (const auto& s : seeds.seeds) out.values.push_back(evaluate_share(secret, s, counters));
  return out;
}

enum class Direction { encrypt, decrypt };

// Keyed invertible stand-in for pairwise symmetric encryption: the magnitude
// is XORed with a keystream over a fixed-width encoding and the sign is kept
// in the bit above it. This is NOT a cipher; it only models message cost and
// makes ciphertexts key-dependent.
inline constexpr unsigned kTransformBits = 8192;

inline BigInt keystream(KeyId key) {
  std::array<std::uint64_t, kTransformBits / 64> limbs;
  for (unsigned i = 0; i < limbs.size(); ++i) limbs[i] = mix64(mix64(key) + i);
  BigInt ks;
  import_bits(ks, limbs.begin(), limbs.end());  // most significant limb first
  return ks;
}

inline BigInt pairwise_transform(const BigInt& value, KeyId key, Direction direction, OpCounters& counters) {
  static const BigInt sign_bit = BigInt(1) << kTransformBits;
  const BigInt ks = keystream(key);
  if (direction == Direction::encrypt) {
    ++counters.enc;
    const bool negative = value < 0;
    const BigInt mag = negative ? BigInt(-value) : value;
    if (mag >= sign_bit) throw DomainError("value too wide for the pairwise transform");
    BigInt c = mag ^ ks;
    if (negative) c |= sign_bit;
    return c;
  }
  if (value < 0 || value >= (sign_bit << 1)) throw DomainError("not a pairwise-transform ciphertext");
  const bool negative = bit_test(value, kTransformBits);
  BigInt mag = value;
  if (negative) bit_unset(mag, kTransformBits);
  mag ^= ks;
  return negative ? BigInt(-mag) : mag;
}

// F = sum of the m shares targeted at one seed (m-1 additions).
inline FValue assemble_f(std::span<const BigInt> shares_at_seed, std::size_t seed_index, std::size_t cluster_size,
                         OpCounters& counters) {
  if (shares_at_seed.size() != cluster_size || cluster_size == 0)
    throw ArityError("expected " + std::to_string(cluster_size) + " shares, got " +
                     std::to_string(shares_at_seed.size()));
  FValue f{seed_index, 0};
  for (const auto& s : shares_at_seed) f.value += s;
  counters.add += cluster_size - 1;
  return f;
}

// Solves G U = F for the Vandermonde matrix G of the seeds, exactly. Uses
// Newton divided differences, then expands the Newton form into monomial
// coefficients. With integer seeds the solution is integral iff every
// divided difference is, so the work stays in integers and any remainder
// marks a corrupted transcript. Counted as one inversion plus one
// multiplication.
inline Recovery solve_vandermonde(const ClusterSeeds& seeds, std::span<const FValue> f_values, OpCounters& counters) {
  const std::size_t m = seeds.size();
  if (m == 0 || f_values.size() != m)
    throw ArityError("expected " + std::to_string(m) + " F-values, got " + std::to_string(f_values.size()));
  {
    std::set<BigInt> seen(seeds.seeds.begin(), seeds.seeds.end());
    if (seen.size() != m) throw SingularMatrixError("repeated public seed makes the Vandermonde matrix singular");
  }
  std::vector<std::optional<BigInt>> rhs(m);
  for (const auto& f : f_values) {
    if (f.seed_index >= m || rhs[f.seed_index]) throw ArityError("F-values must cover each seed exactly once");
    rhs[f.seed_index] = f.value;
  }

  counters.mat_inv += 1;
  counters.mat_mul += 1;

  const std::vector<BigInt>& x = seeds.seeds;
  std::vector<BigInt> c(m);
  for (std::size_t i = 0; i < m; ++i) c[i] = *rhs[i];
  BigInt q, r;
  for (std::size_t j = 1; j < m; ++j)
    for (std::size_t i = m - 1; i >= j; --i) {
      divide_qr(BigInt(c[i] - c[i - 1]), BigInt(x[i] - x[i - j]), q, r);
      if (r != 0) throw CorruptedTranscriptError("Vandermonde solution is not integral");
      c[i] = q;
    }

  // Horner expansion of sum_k c_k prod_{i<k} (t - x_i).
  std::vector<BigInt> poly(m, 0);
  poly[0] = c[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) {
    // poly <- poly * (t - x_k) + c_k
    for (std::size_t d = m - 1; d >= 1; --d) poly[d] = poly[d - 1] - x[k] * poly[d];
    poly[0] = c[k] - x[k] * poly[0];
  }

  Recovery out;
  out.sum = poly[0];
  out.coefficient_sums.assign(poly.begin() + 1, poly.end());
  return out;
}

// Peels r_d, ..., r_1 off F by floor division against powers of the seed;
// the remainder is the sum. Exact only when the seed dominates the sum and
// every coefficient sum. One division and one subtraction per degree.
inline Recovery recover_by_division(const FValue& f, const BigInt& seed, std::size_t degree, OpCounters& counters) {
  if (seed < 1) throw DomainError("division recovery needs a positive seed");
  std::vector<BigInt> powers(degree + 1);
  powers[0] = 1;
  for (std::size_t i = 1; i <= degree; ++i) powers[i] = powers[i - 1] * seed;

  Recovery out;
  out.coefficient_sums.assign(degree, 0);
  BigInt rem = f.value;
  for (std::size_t d = degree; d >= 1; --d) {
    out.coefficient_sums[d - 1] = floor_div(rem, powers[d]);
    rem -= out.coefficient_sums[d - 1] * powers[d];
  }
  out.sum = rem;
  counters.div += degree;
  counters.sub += degree;
  return out;
}

inline Recovery recover_by_division(const FValue& f, const BigInt& seed, OpCounters& counters) {
  return recover_by_division(f, seed, 2, counters);
}

struct Check {
  bool accepted = true;
  std::optional<std::size_t> offending;
  std::string reason;

  explicit operator bool() const noexcept { return accepted; }

  static Check accept() { return {}; }
  static Check reject(std::size_t index, std::string why) { return {false, index, std::move(why)}; }
};

namespace detail {
// Every value must be strictly below the sum of the others.
inline Check triangle(std::span<const BigInt> values, std::string_view what) {
  if (values.size() < 3) throw ArityError("triangle check needs at least three values");
  BigInt total = 0;
  for (const auto& v : values) total += v;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= total - values[i])
      return Check::reject(i, std::string(what) + " " + values[i].str() + " (index " + std::to_string(i) +
                                  ") is not below the sum of the others");
  return Check::accept();
}
}  // namespace detail

inline Check validate_seeds(const ClusterSeeds& seeds) { return detail::triangle(seeds.seeds, "seed"); }

inline Check validate_shares(std::span<const BigInt> shares_at_one_seed) {
  return detail::triangle(shares_at_one_seed, "share");
}

// Leader seed used by efficient mode; large enough that floor division
// separates the sum from every coefficient sum.
inline BigInt efficient_leader_seed(std::uint64_t value_bound, std::uint64_t coeff_bound, std::size_t m) {
  return BigInt(2) * m * (BigInt(value_bound) + BigInt(coeff_bound) * m);
}

using PairKeyLookup = std::function<std::optional<KeyId>(std::size_t, std::size_t)>;

struct ClusterOptions {
  std::uint64_t value_bound = 1000;  // D
  std::uint64_t coeff_bound = 1000;  // R
  // Pair key between cluster positions i and j; empty -> synthetic keys.
  PairKeyLookup pair_key;
};

namespace detail {
inline KeyId pair_key(const ClusterOptions& opt, std::size_t i, std::size_t j) {
  if (!opt.pair_key) {
    const std::size_t lo = std::min(i, j), hi = std::max(i, j);
    return mix64((static_cast<std::uint64_t>(lo) << 32) | hi);
  }
  if (auto k = opt.pair_key(i, j)) return *k;
  throw NoSecureLinkError("no pair key between cluster members " + std::to_string(i) + " and " + std::to_string(j));
}

inline BigInt send_encrypted(const BigInt& v, const ClusterOptions& opt, std::size_t from, std::size_t to,
                             OpCounters& counters) {
  const KeyId key = pair_key(opt, from, to);
  const BigInt wire = pairwise_transform(v, key, Direction::encrypt, counters);
  OpCounters scratch;  // decryption is not tallied
  return pairwise_transform(wire, key, Direction::decrypt, scratch);
}

inline void check_secrets(std::span<const NodeSecret> secrets, const ClusterOptions& opt) {
  const std::size_t m = secrets.size();
  for (const auto& s : secrets) {
    if (s.coefficients.size() != m - 1) throw ArityError("each secret needs m-1 coefficients");
    if (s.private_value < 0 || s.private_value >= opt.value_bound)
      throw ConfigError("private value outside [0, D)");
    for (const auto& r : s.coefficients)
      if (r < 1 || r >= opt.coeff_bound) throw ConfigError("coefficient outside [1, R)");
  }
}
}  // namespace detail

// One complete in-cluster round. Position 0 is the cluster leader.
inline ClusterResult run_cluster(std::span<const NodeSecret> secrets, const ClusterSeeds& seeds, Mode mode,
                                 OpCounters& counters, const ClusterOptions& options = {}) {
  const std::size_t m = secrets.size();
  if (m < 3) throw ArityError("CPDA needs at least three cluster members");
  if (seeds.size() != m) throw ArityError("one public seed per member required");
  seeds.validate();
  detail::check_secrets(secrets, options);

  OpCounters round;
  ClusterResult result;
  result.mode = mode;

  if (mode == Mode::efficient) {
    const BigInt& x = seeds[0];
    const BigInt bound = BigInt(m) * (std::max(options.value_bound, options.coeff_bound) - 1);
    if (x <= bound) throw ConfigError("leader seed too small for division recovery");
    std::vector<BigInt> at_leader(m);
    for (std::size_t i = 0; i < m; ++i) {
      const BigInt v = evaluate_share(secrets[i], x, round);
      at_leader[i] = i == 0 ? v : detail::send_encrypted(v, options, i, 0, round);
    }
    FValue f = assemble_f(at_leader, 0, m, round);
    round.add += m - 1;  // coefficient-sum composition
    const Recovery rec = recover_by_division(f, x, m - 1, round);
    result.recovered_sum = rec.sum;
    result.recovered_coefficient_sums = rec.coefficient_sums;
    result.counters = round;
    counters += round;
    return result;
  }

  if (mode == Mode::hardened) {
    if (auto check = validate_seeds(seeds); !check) {
      counters += round;
      throw ProtocolAbort("seed_triangle", check.reason);
    }
  }

  // received[j][i]: share of node i at seed j, as held by node j.
  std::vector<std::vector<BigInt>> received(m, std::vector<BigInt>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const ShareVector sv = compute_shares(secrets[i], seeds, round);
    for (std::size_t j = 0; j < m; ++j)
      received[j][i] = i == j ? sv.values[j] : detail::send_encrypted(sv.values[j], options, i, j, round);
  }

  if (mode == Mode::hardened) {
    for (std::size_t j = 0; j < m; ++j) {
      if (auto check = validate_shares(received[j]); !check) {
        counters += round;
        throw ProtocolAbort("share_triangle", check.reason);
      }
    }
  }

  std::vector<FValue> fs;
  fs.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    fs.push_back(assemble_f(received[j], j, m, round));
    round.add += m - 1;
  }
  Recovery rec;
  try {
    rec = solve_vandermonde(seeds, fs, round);
  } catch (...) {
    counters += round;
    throw;
  }
  result.recovered_sum = rec.sum;
  result.recovered_coefficient_sums = rec.coefficient_sums;
  result.counters = round;
  counters += round;
  return result;
}

// Full honest exchange, recorded for analysis: shares[i][j] is node i's
// share at seed j, f[j] the F-value at seed j.
struct Transcript {
  ClusterSeeds seeds;
  std::vector<std::vector<BigInt>> shares;
  std::vector<BigInt> f;
};

inline Transcript record_transcript(std::span<const NodeSecret> secrets, const ClusterSeeds& seeds) {
  Transcript t;
  t.seeds = seeds;
  OpCounters scratch;
  for (const auto& s : secrets) t.shares.push_back(compute_shares(s, seeds, scratch).values);
  t.f.assign(seeds.size(), 0);
  for (const auto& row : t.shares)
    for (std::size_t j = 0; j < row.size(); ++j) t.f[j] += row[j];
  return t;
}

inline NodeSecret random_secret(Rng& rng, std::size_t m, std::uint64_t value_bound, std::uint64_t coeff_bound) {
  NodeSecret s;
  s.private_value = uniform_big(rng, 0, value_bound);
  for (std::size_t i = 0; i + 1 < m; ++i) s.coefficients.push_back(uniform_big(rng, 1, coeff_bound));
  return s;
}

// m distinct seeds drawn uniformly from [lo, hi).
inline ClusterSeeds random_seeds(Rng& rng, std::size_t m, std::uint64_t lo, std::uint64_t hi) {
  if (hi <= lo || hi - lo < m) throw ConfigError("seed range too small");
  std::set<std::uint64_t> picked;
  ClusterSeeds out;
  std::uniform_int_distribution<std::uint64_t> d(lo, hi - 1);
  while (out.seeds.size() < m) {
    const auto s = d(rng);
    if (picked.insert(s).second) out.seeds.emplace_back(s);
  }
  return out;
}

}  // namespace wsnagg::cpda
