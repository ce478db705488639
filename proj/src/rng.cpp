#include "clpoison/rng.hpp"

#include <cmath>
#include <numbers>

namespace clpoison {

double Rng::next_gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  do {
    u = next_double();
  } while (u <= 0.0);
  const double v = next_double();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  have_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

std::size_t Rng::next_discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw Error("next_discrete: bad weight");
    total += w;
  }
  if (total <= 0.0) throw Error("next_discrete: weights sum to zero");
  const double target = next_double() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (target < cum) return i;
  }
  return weights.size() - 1;  // target == total up to rounding
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace clpoison
