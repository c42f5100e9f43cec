#pragma once

#include <cstdint>
#include <cmath>
#include <limits>

namespace efpqubo {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive a stream key from an arbitrary tuple of integers.
template <typename... Ts>
constexpr std::uint64_t stream_key(std::uint64_t seed, Ts... parts) {
  std::uint64_t k = mix64(seed);
  ((k = mix64(k ^ static_cast<std::uint64_t>(parts))), ...);
  return k;
}

// Counter-based generator: the i-th output is a pure function of (key, i),
// so a stream can be rebuilt anywhere from its key alone.  Satisfies
// std::uniform_random_bit_generator, but the helpers below avoid the
// implementation-defined std distributions to keep results portable.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key = 0) : key_(key) {}
  template <typename... Ts>
  static constexpr Stream make(std::uint64_t seed, Ts... parts) {
    return Stream(stream_key(seed, parts...));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // (0, 1], safe for log().
  double uniform_pos() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  // Uniform integer in [0, n), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform integer in [0, n) from 32 bits; two indices per 64-bit output.
  std::uint32_t below32(std::uint32_t n) {
    std::uint64_t m = static_cast<std::uint64_t>(next32()) * n;
    if (static_cast<std::uint32_t>(m) < n) {
      const std::uint32_t t = (0u - n) % n;
      while (static_cast<std::uint32_t>(m) < t) m = static_cast<std::uint64_t>(next32()) * n;
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream position simple.
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double exponential() { return -std::log(uniform_pos()); }

  std::uint64_t key() const { return key_; }

 private:
  std::uint32_t next32() {
    if (spare_) {
      spare_ = false;
      return static_cast<std::uint32_t>(half_ >> 32);
    }
    half_ = (*this)();
    spare_ = true;
    return static_cast<std::uint32_t>(half_);
  }

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  std::uint64_t half_ = 0;
  bool spare_ = false;
};

}  // namespace efpqubo
