#pragma once

#include <cstdint>
#include <limits>

namespace vsret {

/// Counter-based generator: the n-th output is a bijective mix of
/// (key + n * golden gamma), so any stream can be split off by deriving a new
/// key without touching the parent's counter. All randomness in the engine
/// descends from one 64-bit seed through split().
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  /// Child stream identified by `tag`. Deterministic; independent of how many
  /// values the parent has produced.
  [[nodiscard]] Rng split(std::uint64_t tag) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(tag + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  result_type operator()() {
    ++counter_;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling, so unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one value per call, no cached state).
  double normal();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace vsret
