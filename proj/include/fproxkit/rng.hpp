#pragma once

// Deterministic random helpers. std::mt19937_64 itself is fully specified by
// the standard, but the standard *distributions* (uniform_int_distribution,
// normal_distribution, shuffle) are implementation-defined, so everything that
// maps engine output to values is hand-rolled here and produces identical
// streams on every platform.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace fproxkit::rng {

using Engine = std::mt19937_64;

// splitmix64 step; used to derive decorrelated child seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for an independent named stream of a base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Uniform integer in [0, n) by rejection sampling (unbiased).
inline std::uint64_t uniform_index(Engine& g, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;  // largest multiple of n <= 2^64-1
  std::uint64_t v = g();
  while (v >= limit) v = g();
  return v % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Engine& g, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(g);
}

// Box-Muller transform; one variate per call, the sibling is discarded so
// call sites stay stateless.
inline double normal(Engine& g, double mean = 0.0, double stdev = 1.0) {
  double u1 = uniform_unit(g);
  while (u1 <= 0.0) u1 = uniform_unit(g);
  const double u2 = uniform_unit(g);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double two_pi = 6.28318530717958647692;
  return mean + stdev * r * std::cos(two_pi * u2);
}

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Engine& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Engine& g, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(g, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace fproxkit::rng
