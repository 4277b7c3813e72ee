#pragma once

#include <cmath>
#include <cstdint>

namespace msg {

// Counter-based generator: every draw is a pure function of (seed, stream, counter),
// so independent consumers can split one run seed without sharing state.
// The mixing function is SplitMix64's finalizer.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  // Derive an independent generator for a named sub-stream.
  [[nodiscard]] constexpr CounterRng split(std::uint64_t stream) const noexcept {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  constexpr std::uint64_t next_u64() noexcept { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Box-Muller; consumes two draws per call.
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

  [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fixed stream ids so one seed drives every consumer reproducibly.
namespace streams {
inline constexpr std::uint64_t kWeights = 1;
inline constexpr std::uint64_t kSplits = 2;
inline constexpr std::uint64_t kNegatives = 3;
inline constexpr std::uint64_t kGraph = 4;
inline constexpr std::uint64_t kFeatures = 5;
}  // namespace streams

}  // namespace msg
