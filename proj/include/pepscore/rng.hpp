#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace pepscore {

// SplitMix64 finalizer, used to spread user-facing seeds before they reach
// the engine and to derive independent substreams.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Substream `index` of a master seed. Streams for distinct indices are
// decorrelated by the SplitMix64 mix; the mapping is part of the output
// contract (reports record only the master seed).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

// FNV-1a, for deriving stream seeds from string identifiers.
inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Random source with hand-rolled transforms. Only the standardized
// mt19937_64 bit stream is consumed, so sequences are reproducible across
// standard libraries (std::*_distribution would not be).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller standard normal.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased uniform integer in [0, bound); bound must be >= 1.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t rem =
        std::numeric_limits<std::uint64_t>::max() % bound;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::mt19937_64 engine_;
};

}  // namespace pepscore
