#pragma once

#include <cmath>
#include <cstdint>

namespace treeprox {

// splitmix64; output sequence is fixed by the standard reference
// implementation, so seeded results are stable across platforms.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Deterministic RNG with explicit substreams. Avoids std::*_distribution
/// on purpose: their outputs are not pinned by the standard, and model
/// bytes must reproduce from (seed, flags) alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { next(); }

  /// Independent stream for (seed, stream_id); used per tree so training
  /// order and thread schedule cannot change the result.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t s = seed;
    std::uint64_t mixed = splitmix64_next(s) ^ (0xD1B54A32D192ED03ull * (stream_id + 1));
    return Rng(mixed);
  }

  std::uint64_t next() { return splitmix64_next(state_); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    // multiply-shift; bias is < n / 2^64, irrelevant at these ranges
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (pair cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;        // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace treeprox
