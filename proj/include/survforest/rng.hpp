#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace survforest {

/// SplitMix64 finalizer; a bijective mix of 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// stream identifiers (counter-based, so stream b never depends on how many
/// other streams were drawn).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t id : path) s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return s;
}

/// Stream identifiers used across the library.
namespace stream {
inline constexpr std::uint64_t kTree = 1;
inline constexpr std::uint64_t kCensorForest = 2;
inline constexpr std::uint64_t kReplication = 3;
inline constexpr std::uint64_t kCovariates = 4;
inline constexpr std::uint64_t kFailure = 5;
inline constexpr std::uint64_t kCensoring = 6;
inline constexpr std::uint64_t kTrain = 7;
inline constexpr std::uint64_t kTest = 8;
inline constexpr std::uint64_t kForest = 9;
}  // namespace stream

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

__extension__ using Uint128 = unsigned __int128;

/// Uniform integer in [0, bound) without the implementation-defined
/// behaviour of std::uniform_int_distribution (Lemire's method with rejection).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const Uint128 m = static_cast<Uint128>(rng()) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal draw (polar Box-Muller, one value per call).
inline double standard_normal(Rng& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

/// Exponential draw with the given mean.
inline double exponential_mean(Rng& rng, double mean) { return -mean * std::log1p(-uniform01(rng)); }

}  // namespace survforest
