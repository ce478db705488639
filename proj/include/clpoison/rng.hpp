#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "clpoison/error.hpp"

namespace clpoison {

/// Deterministic random source. All draws are defined directly on the
/// mt19937_64 output stream so that results are identical across platforms
/// and standard library implementations (std::uniform_*_distribution is
/// implementation-defined and must not be used anywhere in this codebase).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform index in [0, n). Lemire multiply-shift; bias is < 2^-64.
  std::size_t next_index(std::size_t n) {
    if (n == 0) throw Error("Rng::next_index: n must be positive");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// Standard normal via Box-Muller on the portable uniform draws.
  double next_gaussian();

  /// Sample an index from an unnormalized non-negative weight vector.
  std::size_t next_discrete(std::span<const double> weights);

  /// SplitMix64-style stream derivation, used to give independent
  /// deterministic substreams to trials / generations / children.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace clpoison
