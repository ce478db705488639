#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <limits>

#include "clpoison/defense.hpp"
#include "clpoison/error.hpp"
#include "clpoison/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace clpoison;
using namespace clpoison::testing;

namespace {

struct LmFixture {
  Dataset corpus;
  Vocabulary vocab;
  NGramModel lm;
  LmFixture()
      : corpus(make_dataset({{"the cat sat on the mat", 0},
                             {"the dog sat on the rug", 0},
                             {"a cat and a dog", 1},
                             {"the mat and the rug", 1}})),
        vocab(build_vocab(corpus, 1)),
        lm(fit_ngram(corpus, vocab, 3, 0.1)) {}
};

}  // namespace

TEST_CASE("an infinite threshold is the identity filter") {
  LmFixture f;
  const Example x = make_example("the cat sat on the rug");
  const Example out =
      onion_filter(f.lm, x, std::numeric_limits<double>::infinity());
  CHECK(out.tokens == x.tokens);
}

TEST_CASE("an inserted never-seen token has the strictly largest suspicion") {
  LmFixture f;
  Example x = f.corpus.examples[0];  // fully in-corpus sentence
  Example poisoned = x;
  poisoned.tokens.insert(poisoned.tokens.begin() + 3, "zqj");

  // independent computation straight from perplexity calls
  const double full = perplexity(f.lm, poisoned);
  std::vector<double> expected;
  for (std::size_t i = 0; i < poisoned.tokens.size(); ++i) {
    Example reduced = poisoned;
    reduced.tokens.erase(reduced.tokens.begin() + static_cast<long>(i));
    expected.push_back(full - perplexity(f.lm, reduced));
  }
  const std::vector<double> scores = suspicion_scores(f.lm, poisoned);
  REQUIRE(scores.size() == expected.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    CHECK(scores[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != 3) CHECK(scores[3] > scores[i]);

  // removed at any threshold below its score
  const Example filtered = onion_filter(f.lm, poisoned, scores[3] - 1e-9);
  for (const auto& t : filtered.tokens) CHECK(t != "zqj");
}

TEST_CASE("single-token sentences are always kept") {
  LmFixture f;
  const Example x = make_example("zqj");
  const Example out = onion_filter(f.lm, x, -1e18);
  CHECK(out.tokens == x.tokens);
  CHECK(suspicion_scores(f.lm, x) == std::vector<double>{0.0});
}

TEST_CASE("the filter never empties a sentence") {
  LmFixture f;
  const Example x = make_example("zqj xwk");
  const Example out = onion_filter(f.lm, x, -1e18);  // everything exceeds
  CHECK(out.tokens.size() == 1);
}

TEST_CASE("filter output is an ordered subsequence of the input") {
  LmFixture f;
  Rng rng(12);
  std::vector<Token> pool = {"the", "cat", "dog", "sat", "mat", "rug", "zqj"};
  for (int trial = 0; trial < 30; ++trial) {
    Example x;
    const auto len = 2 + rng.next_index(8);
    for (std::size_t i = 0; i < len; ++i)
      x.tokens.push_back(pool[rng.next_index(pool.size())]);
    const double thr = -5.0 + 10.0 * rng.next_double();
    const Example out = onion_filter(f.lm, x, thr);
    // subsequence check
    std::size_t j = 0;
    for (const auto& t : out.tokens) {
      while (j < x.tokens.size() && x.tokens[j] != t) ++j;
      REQUIRE(j < x.tokens.size());
      ++j;
    }
    CHECK(!out.tokens.empty());
  }
}

TEST_CASE("suspicion scores ignore the label") {
  LmFixture f;
  Example a = make_example("the cat sat", 0);
  Example b = make_example("the cat sat", 1);
  CHECK(suspicion_scores(f.lm, a) == suspicion_scores(f.lm, b));
}

TEST_CASE("quantile arithmetic") {
  std::vector<double> scores;
  for (int i = 1; i <= 100; ++i) scores.push_back(i);
  CHECK(quantile(scores, 0.95) == doctest::Approx(95.0).epsilon(0.011));
  CHECK(quantile(scores, 1.0) == doctest::Approx(100.0));
  CHECK(quantile(scores, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(scores, 0.001) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("calibration bounds the false-removal rate on the dev corpus") {
  LmFixture f;
  const double thr = calibrate_threshold(f.lm, f.corpus, 0.25);
  std::size_t removed = 0, total = 0;
  for (const auto& e : f.corpus.examples) {
    for (double s : suspicion_scores(f.lm, e)) {
      removed += s > thr ? 1 : 0;
      ++total;
    }
  }
  // quantile discretization allows at most one extra removal on small samples
  CHECK(static_cast<double>(removed) / static_cast<double>(total) <=
        0.25 + 1.0 / static_cast<double>(total) + 1e-9);

  // rate near zero keeps everything
  const double hi = calibrate_threshold(f.lm, f.corpus, 1e-6);
  std::size_t removed_hi = 0;
  for (const auto& e : f.corpus.examples)
    for (double s : suspicion_scores(f.lm, e)) removed_hi += s > hi ? 1 : 0;
  CHECK(removed_hi == 0);

  CHECK_THROWS_AS(calibrate_threshold(f.lm, Dataset{}, 0.05), Error);
  CHECK_THROWS_AS(calibrate_threshold(f.lm, f.corpus, 0.0), Error);
  CHECK_THROWS_AS(calibrate_threshold(f.lm, f.corpus, 1.0), Error);
}
