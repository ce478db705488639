#pragma once

// Shared toy-instance generator and exhaustive enumeration oracle for the
// genetic search. The oracle enumerates every variant of the search space
// and applies the constraint definitions directly (plain arithmetic over
// encode/perplexity outputs), independent of the search implementation.

#include <memory>
#include <vector>

#include "clpoison/attack.hpp"
#include "clpoison/ngram.hpp"
#include "clpoison/rng.hpp"
#include "clpoison/victim.hpp"
#include "helpers.hpp"

namespace clpoison::testing {

struct ToyInstance {
  std::unique_ptr<Vocabulary> vocab;
  Dataset corpus;
  EncoderParams params;
  std::unique_ptr<NGramModel> lm;
  Example base;          // label = target class
  TargetInstance target;
  SynonymDictionary dict;
  GeneticConfig cfg;
};

/// Search spaces stay within 3 substitutable positions x up to 2 synonyms
/// (at most 27 variants including the base). Sentences are long enough that
/// one substitution moves the pooled features by a small step relative to
/// the base-target gap, the regime the search is designed for.
inline ToyInstance make_toy_instance(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Token> pool;
  for (int i = 0; i < 14; ++i) pool.push_back("t" + std::to_string(i));
  constexpr int kLen = 10;
  ToyInstance inst;

  std::vector<std::pair<std::string, int>> rows;
  for (int s = 0; s < 6; ++s) {
    std::string text;
    for (int i = 0; i < kLen; ++i) {
      if (i) text += ' ';
      text += pool[rng.next_index(pool.size())];
    }
    rows.push_back({text, static_cast<int>(s % 2)});
  }
  // every pool token appears at least once so the LM has no zero-count rows
  std::string all;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i) all += ' ';
    all += pool[i];
  }
  rows.push_back({all, 0});
  inst.corpus = make_dataset(rows);
  inst.vocab = std::make_unique<Vocabulary>(build_vocab(inst.corpus, 1));
  inst.params = init_params(*inst.vocab, 8, 12, 2, Rng::mix(seed, 1));
  inst.params.w1 *= 0.3;  // mild features keep the saliency spread gentle
  inst.lm = std::make_unique<NGramModel>(fit_ngram(inst.corpus, *inst.vocab, 2, 0.2));

  auto sentence = [&](int len) {
    std::vector<Token> toks;
    for (int i = 0; i < len; ++i) toks.push_back(pool[rng.next_index(pool.size())]);
    return toks;
  };
  inst.base = Example{sentence(kLen), 1};
  inst.target = TargetInstance{Example{sentence(kLen), 0}, 1};

  inst.dict.per_position.resize(kLen);
  std::vector<std::size_t> positions(kLen);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  for (std::size_t i = positions.size(); i > 1; --i)
    std::swap(positions[i - 1], positions[rng.next_index(i)]);
  const int substitutable = rng.next_double() < 0.15 ? 3 : 2;
  for (int p = 0; p < substitutable; ++p) {
    const std::size_t pos = positions[static_cast<std::size_t>(p)];
    const int cands = 1 + static_cast<int>(rng.next_index(2));  // 1..2
    for (int c = 0; c < cands; ++c) {
      Token t;
      do {
        t = pool[rng.next_index(pool.size())];
      } while (t == inst.base.tokens[pos]);
      bool dup = false;
      for (const auto& existing : inst.dict.per_position[pos])
        dup |= existing.token == t;
      if (!dup) inst.dict.per_position[pos].push_back({t, 0.9});
    }
    // First candidate acts like a close synonym (small step); any second one
    // is pushed away from the target direction, so per-position candidate
    // quality is well separated, as with real synonym lists.
    const int base_id = inst.vocab->lookup(inst.base.tokens[pos]);
    Eigen::VectorXd away = Eigen::VectorXd::Zero(inst.params.embedding.cols());
    for (const auto& t : inst.base.tokens)
      away += inst.params.embedding.row(inst.vocab->lookup(t));
    for (const auto& t : inst.target.example.tokens)
      away -= inst.params.embedding.row(inst.vocab->lookup(t));
    if (away.norm() > 0) away.normalize();
    for (std::size_t ci = 0; ci < inst.dict.per_position[pos].size(); ++ci) {
      const int cid = inst.vocab->lookup(inst.dict.per_position[pos][ci].token);
      for (long j = 0; j < inst.params.embedding.cols(); ++j)
        inst.params.embedding(cid, j) =
            inst.params.embedding(base_id, j) + 0.45 * rng.next_gaussian() +
            (ci == 0 ? 0.0 : 4.0 * away[j]);
    }
  }

  inst.cfg.population = 20;
  inst.cfg.iterations = 10;
  inst.cfg.delta = 0.1 + 0.2 * rng.next_double();
  inst.cfg.rho = 2.0 + 2.0 * rng.next_double();
  inst.cfg.max_sub_fraction = 0.3;  // up to 3 of 10 positions
  inst.cfg.seed = Rng::mix(seed, 2);
  return inst;
}

struct OracleOptimum {
  bool any_passing = false;
  double best_fitness = 0.0;
  std::vector<std::vector<Token>> optima;
  long variants = 0;
};

inline OracleOptimum enumerate_optimum(const ToyInstance& inst) {
  const AttackContext ctx{inst.params, *inst.vocab, *inst.lm};
  const FeatureVector ht = encode(ctx.encoder, ctx.vocab, inst.target.example);
  const FeatureVector hb = encode(ctx.encoder, ctx.vocab, inst.base);
  const double base_ppl = perplexity(*inst.lm, inst.base);
  const std::size_t n = inst.base.tokens.size();

  std::vector<std::vector<Token>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    options[i].push_back(inst.base.tokens[i]);
    for (const auto& c : inst.dict.per_position[i]) options[i].push_back(c.token);
  }

  OracleOptimum out;
  std::vector<std::size_t> choice(n, 0);
  while (true) {
    std::vector<Token> tokens(n);
    int subs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tokens[i] = options[i][choice[i]];
      if (tokens[i] != inst.base.tokens[i]) ++subs;
    }
    ++out.variants;

    // direct constraint arithmetic
    const double frac = static_cast<double>(subs) / static_cast<double>(n);
    bool ok = frac <= inst.cfg.max_sub_fraction;
    if (ok) {
      const FeatureVector h = encode(ctx.encoder, ctx.vocab, Example{tokens, 1});
      const double cosine =
          (h.norm() == 0.0 || hb.norm() == 0.0)
              ? 0.0
              : h.dot(hb) / (h.norm() * hb.norm());
      ok = cosine >= inst.cfg.delta &&
           perplexity(*inst.lm, Example{tokens, 1}) <= inst.cfg.rho * base_ppl;
      if (ok) {
        const double fit = (h - ht).squaredNorm();
        if (!out.any_passing || fit < out.best_fitness - 1e-15) {
          out.any_passing = true;
          out.best_fitness = fit;
          out.optima.clear();
          out.optima.push_back(tokens);
        } else if (std::abs(fit - out.best_fitness) <= 1e-15) {
          out.optima.push_back(tokens);
        }
      }
    }

    std::size_t i = 0;
    for (; i < n; ++i) {
      if (++choice[i] < options[i].size()) break;
      choice[i] = 0;
    }
    if (i == n) break;
  }
  return out;
}

}  // namespace clpoison::testing
