#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace efpqubo {

using Bits = std::vector<std::uint8_t>;

enum class Scheme { plain, l1_mod, l0_single, l0_double };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::plain: return "plain";
    case Scheme::l1_mod: return "l1_mod";
    case Scheme::l0_single: return "l0_single";
    default: return "l0_double";
  }
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "plain") return Scheme::plain;
  if (s == "l1_mod") return Scheme::l1_mod;
  if (s == "l0_single" || s == "single") return Scheme::l0_single;
  if (s == "l0_double" || s == "double") return Scheme::l0_double;
  throw ParameterError("unknown encoding scheme: " + s);
}

inline bool is_l0(Scheme s) { return s == Scheme::l0_single || s == Scheme::l0_double; }

enum class Role { b, p, n, r, q };

struct BitLayout {
  Scheme scheme = Scheme::l0_double;
  std::size_t k_coeffs = 1;
  std::vector<double> g;  // magnitudes when sign_split
  bool sign_split = true;
  double cross_penalty = 2.0;
  int i_min = 0, i_max = -1;  // set when g = 2^i over [i_min, i_max]

  // Sign-split powers of two; used for every scheme so the value bits are
  // identical and only the regulator differs.
  static BitLayout powers_of_two(Scheme scheme, std::size_t k, int i_min = -3, int i_max = 2,
                                 double cross_penalty = 2.0) {
    require(i_min <= i_max, "BitLayout: i_min > i_max");
    BitLayout l;
    l.scheme = scheme;
    l.k_coeffs = k;
    l.cross_penalty = cross_penalty;
    l.i_min = i_min;
    l.i_max = i_max;
    for (int i = i_min; i <= i_max; ++i) l.g.push_back(std::ldexp(1.0, i));
    l.validate();
    return l;
  }

  static BitLayout custom(Scheme scheme, std::size_t k, std::vector<double> g, bool sign_split) {
    BitLayout l;
    l.scheme = scheme;
    l.k_coeffs = k;
    l.g = std::move(g);
    l.sign_split = sign_split;
    l.validate();
    return l;
  }

  void validate() const {
    require(k_coeffs >= 1, "BitLayout: k_coeffs must be >= 1");
    require(!g.empty(), "BitLayout: g must be non-empty");
    for (double v : g) {
      require(v != 0 && std::isfinite(v), "BitLayout: g values must be finite and non-zero");
      if (sign_split) require(v > 0, "BitLayout: sign-split layouts need positive g magnitudes");
    }
    if (scheme == Scheme::l0_double) require(sign_split, "BitLayout: l0_double requires sign-split value bits");
    require(std::isfinite(cross_penalty), "BitLayout: cross_penalty must be finite");
  }

  std::size_t m() const { return g.size(); }
  std::size_t value_bits() const { return g.size() * (sign_split ? 2 : 1); }
  std::size_t ancillas() const {
    switch (scheme) {
      case Scheme::l0_single: return 1;
      case Scheme::l0_double: return 2;
      default: return 0;
    }
  }
  std::size_t bits_per_coeff() const { return value_bits() + ancillas(); }
  std::size_t total_bits() const { return k_coeffs * bits_per_coeff(); }
};

// Block layout per coefficient: [p_0..p_{M-1}, n_0..n_{M-1}] or [b_0..b_{M-1}],
// then r, then q.
class BitIndexMap {
 public:
  explicit BitIndexMap(const BitLayout& l) : m_(l.m()), split_(l.sign_split), anc_(l.ancillas()),
                                             stride_(l.bits_per_coeff()), n_(l.total_bits()) {}

  std::size_t total_bits() const { return n_; }

  std::size_t index(std::size_t a, Role role, std::size_t i = 0) const {
    const std::size_t base = a * stride_;
    const std::size_t vb = m_ * (split_ ? 2 : 1);
    switch (role) {
      case Role::b: require(!split_ && i < m_, "BitIndexMap: bad b index"); return base + i;
      case Role::p: require(split_ && i < m_, "BitIndexMap: bad p index"); return base + i;
      case Role::n: require(split_ && i < m_, "BitIndexMap: bad n index"); return base + m_ + i;
      case Role::r: require(anc_ >= 1, "BitIndexMap: layout has no r ancilla"); return base + vb;
      default: require(anc_ >= 2, "BitIndexMap: layout has no q ancilla"); return base + vb + 1;
    }
  }

  struct Slot {
    std::size_t a;
    Role role;
    std::size_t i;
  };

  Slot role_of(std::size_t bit) const {
    require(bit < n_, "BitIndexMap: bit out of range");
    const std::size_t a = bit / stride_, off = bit % stride_;
    if (!split_ && off < m_) return {a, Role::b, off};
    if (split_ && off < m_) return {a, Role::p, off};
    if (split_ && off < 2 * m_) return {a, Role::n, off - m_};
    return {a, off == m_ * (split_ ? 2 : 1) ? Role::r : Role::q, 0};
  }

 private:
  std::size_t m_;
  bool split_;
  std::size_t anc_, stride_, n_;
};

namespace detail {

// Value of one coefficient block.
inline double block_value(const BitLayout& l, const std::uint8_t* x) {
  double c = 0;
  const std::size_t m = l.m();
  for (std::size_t i = 0; i < m; ++i) {
    if (x[i]) c += l.g[i];
    if (l.sign_split && x[m + i]) c -= l.g[i];
  }
  return c;
}

// Regulator of one coefficient block.
inline double block_penalty(const BitLayout& l, const std::uint8_t* x) {
  const std::size_t m = l.m(), vb = l.value_bits();
  switch (l.scheme) {
    case Scheme::plain: return 0;
    case Scheme::l1_mod: {
      double s = 0;
      for (std::size_t i = 0; i < vb; ++i)
        if (x[i]) s += std::abs(l.g[i % m]);
      return s;
    }
    case Scheme::l0_single: {
      double on = 0;
      for (std::size_t i = 0; i < vb; ++i) on += x[i];
      const double r = x[vb];
      return r + (1 - r) * on;
    }
    default: {
      double sp = 0, sn = 0, pairs = 0;
      for (std::size_t i = 0; i < m; ++i) {
        sp += x[i];
        sn += x[m + i];
        pairs += x[i] * x[m + i];
      }
      const double r = x[vb], q = x[vb + 1], cp = l.cross_penalty;
      return q + (1 + cp * q - r) * sp + r + (1 + cp * r - q) * sn - 2 * pairs;
    }
  }
}

inline void check_length(const BitLayout& l, std::span<const std::uint8_t> bits, const char* who) {
  require(bits.size() == l.total_bits(), std::string(who) + ": bitstring length " + std::to_string(bits.size()) +
                                             " != layout total bits " + std::to_string(l.total_bits()));
}

}  // namespace detail

inline std::vector<double> decode(std::span<const std::uint8_t> bits, const BitLayout& l) {
  detail::check_length(l, bits, "decode");
  std::vector<double> c(l.k_coeffs);
  const std::size_t stride = l.bits_per_coeff();
  for (std::size_t a = 0; a < l.k_coeffs; ++a) c[a] = detail::block_value(l, bits.data() + a * stride);
  return c;
}

inline double reg_penalty(std::span<const std::uint8_t> bits, const BitLayout& l) {
  detail::check_length(l, bits, "reg_penalty");
  double s = 0;
  const std::size_t stride = l.bits_per_coeff();
  for (std::size_t a = 0; a < l.k_coeffs; ++a) s += detail::block_penalty(l, bits.data() + a * stride);
  return s;
}

// Value bits are held fixed; every ancilla assignment is tried per coefficient.
inline double min_penalty_over_ancillas(std::span<const std::uint8_t> bits, const BitLayout& l) {
  detail::check_length(l, bits, "min_penalty_over_ancillas");
  const std::size_t stride = l.bits_per_coeff(), vb = l.value_bits(), anc = l.ancillas();
  std::vector<std::uint8_t> block(stride);
  double total = 0;
  for (std::size_t a = 0; a < l.k_coeffs; ++a) {
    std::copy_n(bits.data() + a * stride, stride, block.begin());
    double best = INFINITY;
    for (unsigned mask = 0; mask < (1u << anc); ++mask) {
      for (std::size_t t = 0; t < anc; ++t) block[vb + t] = (mask >> t) & 1u;
      best = std::min(best, detail::block_penalty(l, block.data()));
    }
    total += best;
  }
  return total;
}

// (decoded value, penalty) -> number of block configurations.
using DegeneracyProfile = std::map<std::pair<double, double>, std::uint64_t>;

inline DegeneracyProfile degeneracy_profile(const BitLayout& l, std::size_t coefficient_index = 0) {
  require(coefficient_index < l.k_coeffs, "degeneracy_profile: coefficient index out of range");
  const std::size_t b = l.bits_per_coeff();
  if (b > 24) throw CapacityError("degeneracy_profile: " + std::to_string(b) + " bits per coefficient exceeds 24");
  DegeneracyProfile prof;
  std::vector<std::uint8_t> x(b);
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << b); ++s) {
    for (std::size_t i = 0; i < b; ++i) x[i] = (s >> i) & 1u;
    ++prof[{detail::block_value(l, x.data()), detail::block_penalty(l, x.data())}];
  }
  return prof;
}

// Lowest penalty reached by value c and how many configurations reach it.
inline std::pair<double, std::uint64_t> lowest_level(const DegeneracyProfile& prof, double c) {
  double pen = INFINITY;
  std::uint64_t count = 0;
  for (const auto& [key, n] : prof) {
    if (key.first != c) continue;
    if (key.second < pen) {
      pen = key.second;
      count = n;
    }
  }
  return {pen, count};
}

inline nlohmann::json layout_to_json(const BitLayout& l) {
  require(l.i_min <= l.i_max, "layout_to_json: only power-of-two layouts are serializable");
  return {{"scheme", to_string(l.scheme)}, {"i_min", l.i_min}, {"i_max", l.i_max},
          {"k_coeffs", l.k_coeffs}, {"cross_penalty", l.cross_penalty}};
}

inline BitLayout layout_from_json(const nlohmann::json& j) {
  return BitLayout::powers_of_two(scheme_from_string(j.at("scheme").get<std::string>()),
                                  j.at("k_coeffs").get<std::size_t>(), j.value("i_min", -3), j.value("i_max", 2),
                                  j.value("cross_penalty", 2.0));
}

}  // namespace efpqubo
