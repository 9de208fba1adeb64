#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rgs {

using Rng = std::mt19937_64;

/// splitmix64 finalizer. Used for seed derivation so that per-task streams are
/// independent of iteration order.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, const std::string& tag,
                                 std::uint64_t index = 0) {
  return mix64(base ^ mix64(fnv1a64(tag) + 0x632be59bd9b4e019ull * (index + 1)));
}

/// Uniform double in [0,1). Hand-rolled from the top 53 bits so draws are
/// reproducible across standard libraries (std::uniform_real_distribution is
/// implementation-defined).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Index draw from an explicit probability vector (need not be perfectly
/// normalized; rounding residue lands on the last index with nonzero mass, so
/// zero-probability entries are never drawn).
inline int categorical(const std::vector<double>& probs, Rng& rng) {
  double u = uniform01(rng);
  double acc = 0.0;
  int last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_nonzero = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return last_nonzero;
}

}  // namespace rgs
