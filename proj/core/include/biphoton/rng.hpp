#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include <biphoton/errors.hpp>

namespace biphoton {

/// Name recorded in stream metadata and reports so runs are reproducible
/// across implementations of the same generator.
inline constexpr const char* kRngAlgorithm = "xoshiro256++";

/// FNV-1a 64-bit hash. Used to derive per-purpose RNG streams and to hash
/// canonicalized configs.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// SplitMix64, used only to expand seeds into generator state.
struct SplitMix64 {
  std::uint64_t state;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

/// xoshiro256++ by Blackman and Vigna. Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& w : s_) w = sm.next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

/// Derives an independent generator for a named purpose ("noise_s",
/// "tomo/P3,P4", ...) from one master seed. Purpose strings are hashed so
/// adding stages never perturbs existing streams.
inline Xoshiro256pp derive_stream(std::uint64_t master_seed, std::string_view purpose) {
  return Xoshiro256pp(master_seed ^ fnv1a64(purpose));
}

/// Uniform double in (0, 1]: 53-bit mantissa, and the all-zero word maps to
/// exactly 1 so log() below is always finite.
template <class Urbg>
double uniform_open01(Urbg& g) {
  return 1.0 - static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Exponential waiting time with the given mean (inverse CDF).
template <class Urbg>
double exp_interval(Urbg& g, double mean) {
  return -mean * std::log(uniform_open01(g));
}

} // namespace biphoton
