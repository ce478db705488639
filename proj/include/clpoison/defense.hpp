#pragma once

#include <vector>

#include "clpoison/corpus.hpp"
#include "clpoison/ngram.hpp"

namespace clpoison {

/// Leave-one-out perplexity suspicion: score_i = PPL(x) - PPL(x without
/// token i). A large positive score means deleting the token makes the
/// sentence much more fluent, the signature of an inserted trigger word.
struct SuspicionProfile {
  std::vector<double> scores;
  double threshold = 0.0;
};

/// Scores only (threshold left at 0). Single-token sentences get {0}.
std::vector<double> suspicion_scores(const NGramModel& m, const Example& x);

SuspicionProfile suspicion_profile(const NGramModel& m, const Example& x,
                                   double threshold);

/// Removes every token whose suspicion score exceeds the threshold. Never
/// empties a sentence: if everything exceeds, the single least-suspicious
/// token is kept. The output is a subsequence of the input.
Example onion_filter(const NGramModel& m, const Example& x, double threshold);

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Threshold at the (1 - rate) quantile of suspicion scores over the clean
/// dev corpus, bounding the false-removal rate.
double calibrate_threshold(const NGramModel& m, const Dataset& dev,
                           double false_removal_rate);

}  // namespace clpoison
