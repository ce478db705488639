#include "clpoison/defense.hpp"

#include <algorithm>
#include <cmath>

#include "clpoison/error.hpp"

namespace clpoison {

std::vector<double> suspicion_scores(const NGramModel& m, const Example& x) {
  if (x.tokens.empty()) throw Error("suspicion_scores: empty sentence");
  if (x.tokens.size() == 1) return {0.0};
  const double full = perplexity(m, x);
  std::vector<double> scores(x.tokens.size());
  Example reduced;
  reduced.label = x.label;
  for (std::size_t i = 0; i < x.tokens.size(); ++i) {
    reduced.tokens = x.tokens;
    reduced.tokens.erase(reduced.tokens.begin() + static_cast<long>(i));
    scores[i] = full - perplexity(m, reduced);
  }
  return scores;
}

SuspicionProfile suspicion_profile(const NGramModel& m, const Example& x,
                                   double threshold) {
  return {suspicion_scores(m, x), threshold};
}

Example onion_filter(const NGramModel& m, const Example& x, double threshold) {
  const std::vector<double> scores = suspicion_scores(m, x);
  Example out;
  out.label = x.label;
  for (std::size_t i = 0; i < x.tokens.size(); ++i)
    if (!(scores[i] > threshold)) out.tokens.push_back(x.tokens[i]);
  if (out.tokens.empty()) {
    const auto least = static_cast<std::size_t>(
        std::min_element(scores.begin(), scores.end()) - scores.begin());
    out.tokens.push_back(x.tokens[least]);
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile: q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - std::floor(pos);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double calibrate_threshold(const NGramModel& m, const Dataset& dev,
                           double false_removal_rate) {
  if (dev.examples.empty()) throw Error("calibrate_threshold: empty dev set");
  if (!(false_removal_rate > 0.0 && false_removal_rate < 1.0))
    throw Error("calibrate_threshold: rate must be in (0, 1)");
  std::vector<double> scores;
  for (const auto& e : dev.examples) {
    const auto s = suspicion_scores(m, e);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return quantile(std::move(scores), 1.0 - false_removal_rate);
}

}  // namespace clpoison
