#include "clpoison/attack.hpp"

#include <algorithm>
#include <cmath>

#include "clpoison/error.hpp"
#include "clpoison/rng.hpp"

namespace clpoison {

void TargetInstance::validate() const {
  if (example.tokens.empty()) throw Error("TargetInstance: empty example");
  if (target_class == example.label)
    throw Error("TargetInstance: target class must differ from the true label");
}

void GeneticConfig::validate() const {
  if (population < 1) throw Error("GeneticConfig: population must be >= 1");
  if (iterations < 1) throw Error("GeneticConfig: iterations must be >= 1");
  if (candidate_pool < 1) throw Error("GeneticConfig: candidate_pool must be >= 1");
  if (k_syn < 1) throw Error("GeneticConfig: k_syn must be >= 1");
  if (max_cos_dist < 0.0 || max_cos_dist >= 1.0)
    throw Error("GeneticConfig: max_cos_dist must be in [0, 1)");
  if (!(delta > 0.0 && delta < 1.0))
    throw Error("GeneticConfig: delta must be in (0, 1)");
  if (!(rho > 0.0)) throw Error("GeneticConfig: rho must be positive");
  if (!(max_sub_fraction > 0.0 && max_sub_fraction <= 1.0))
    throw Error("GeneticConfig: max_sub_fraction must be in (0, 1]");
  if (!(temperature > 0.0))
    throw Error("GeneticConfig: temperature must be positive");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  if (scores.size() == 0) throw Error("softmax: empty input");
  Eigen::VectorXd e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

double feature_distance(const AttackContext& ctx, std::span<const int> a_ids,
                        std::span<const int> b_ids) {
  return (encode_ids(ctx.encoder, a_ids) - encode_ids(ctx.encoder, b_ids))
      .squaredNorm();
}

double similarity(const EncoderParams& p, const Vocabulary& vocab,
                  const Example& a, const Example& b) {
  const FeatureVector ha = encode(p, vocab, a);
  const FeatureVector hb = encode(p, vocab, b);
  const double na = ha.norm(), nb = hb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return ha.dot(hb) / (na * nb);
}

std::vector<CandidateRef> select_candidates(const EncoderParams& p,
                                            const Vocabulary& vocab,
                                            const Dataset& train,
                                            const TargetInstance& target,
                                            int k) {
  target.validate();
  if (k < 1) throw Error("select_candidates: k must be >= 1");
  const FeatureVector ht = encode(p, vocab, target.example);
  std::vector<CandidateRef> refs;
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    const Example& e = train.examples[i];
    if (e.label != target.target_class) continue;
    const double d = (encode(p, vocab, e) - ht).squaredNorm();
    refs.push_back({static_cast<int>(i), d});
  }
  if (refs.empty())
    throw Error("select_candidates: no training example of the target class");
  std::sort(refs.begin(), refs.end(), [](const CandidateRef& a, const CandidateRef& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.train_index < b.train_index;
  });
  if (static_cast<int>(refs.size()) > k) refs.resize(static_cast<std::size_t>(k));
  return refs;
}

Eigen::VectorXd substitution_saliency(const AttackContext& ctx,
                                      const Example& x_k, const Example& x_t) {
  if (x_k.tokens.empty()) throw Error("substitution_saliency: empty sentence");
  const FeatureVector ht = encode(ctx.encoder, ctx.vocab, x_t);
  std::vector<int> ids = ctx.vocab.to_ids(x_k);
  const double d0 = (encode_ids(ctx.encoder, ids) - ht).squaredNorm();
  Eigen::VectorXd s(static_cast<long>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int keep = ids[i];
    ids[i] = Vocabulary::kMaskId;
    s[static_cast<long>(i)] =
        d0 - (encode_ids(ctx.encoder, ids) - ht).squaredNorm();
    ids[i] = keep;
  }
  return s;
}

Eigen::VectorXd substitution_probability(const AttackContext& ctx,
                                         const Example& x_k,
                                         const Example& x_t) {
  return softmax(substitution_saliency(ctx, x_k, x_t));
}

ConstraintEval check_constraints(const AttackContext& ctx,
                                 const Example& base, double base_ppl,
                                 const FeatureVector& base_features,
                                 const std::vector<Token>& tokens,
                                 const ConstraintSpec& spec) {
  if (tokens.size() != base.tokens.size())
    throw Error("check_constraints: length mismatch against base");
  ConstraintEval ev;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] != base.tokens[i]) ++ev.substitutions;
  ev.sub_fraction =
      static_cast<double>(ev.substitutions) / static_cast<double>(tokens.size());

  const FeatureVector h =
      encode(ctx.encoder, ctx.vocab, Example{tokens, base.label});
  const double nh = h.norm(), nb = base_features.norm();
  ev.similarity = (nh == 0.0 || nb == 0.0) ? 0.0 : h.dot(base_features) / (nh * nb);
  ev.ppl_ratio =
      perplexity(ctx.lm, Example{tokens, base.label}) / base_ppl;

  ev.ok = ev.sub_fraction <= spec.max_sub_fraction &&
          ev.similarity >= spec.delta && ev.ppl_ratio <= spec.rho;
  return ev;
}

namespace {

Individual make_base_individual(const AttackContext& ctx, const Example& base) {
  Individual ind;
  ind.tokens = base.tokens;
  ind.ids = ctx.vocab.to_ids(base);
  ind.substitutions = 0;
  ind.perturbed = false;
  return ind;
}

int count_substitutions(const std::vector<Token>& tokens, const Example& base) {
  int subs = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] != base.tokens[i]) ++subs;
  return subs;
}

}  // namespace

Individual perturb(const AttackContext& ctx, const SynonymDictionary& dict,
                   const Example& base, double base_ppl,
                   const FeatureVector& base_features,
                   const FeatureVector& target_features,
                   const Eigen::VectorXd& position_probs,
                   const ConstraintSpec& spec, Rng& rng) {
  const std::size_t n = base.tokens.size();
  if (dict.per_position.size() != n || position_probs.size() != static_cast<long>(n))
    throw Error("perturb: dictionary/probability size mismatch");

  // Redistribute probability mass onto positions that have candidates.
  std::vector<double> weights;
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < n; ++i) {
    if (dict.per_position[i].empty()) continue;
    positions.push_back(i);
    weights.push_back(position_probs[static_cast<long>(i)]);
  }
  if (positions.empty()) return make_base_individual(ctx, base);

  const std::size_t j = positions[rng.next_discrete(weights)];

  const std::vector<int> base_ids = ctx.vocab.to_ids(base);
  Individual best = make_base_individual(ctx, base);
  double best_fit = 0.0;
  bool found = false;
  std::vector<Token> tokens = base.tokens;
  for (const Candidate& c : dict.per_position[j]) {
    tokens[j] = c.token;
    const ConstraintEval ev =
        check_constraints(ctx, base, base_ppl, base_features, tokens, spec);
    if (!ev.ok) continue;
    std::vector<int> ids = base_ids;
    ids[j] = ctx.vocab.lookup(c.token);
    const double fit =
        (encode_ids(ctx.encoder, ids) - target_features).squaredNorm();
    if (!found || fit < best_fit) {
      found = true;
      best_fit = fit;
      best.tokens = tokens;
      best.ids = std::move(ids);
      best.substitutions = 1;
      best.perturbed = true;
    }
  }
  if (!found) return make_base_individual(ctx, base);
  return best;
}

Individual crossover(const Individual& a, const Individual& b, Rng& rng) {
  if (a.tokens.size() != b.tokens.size())
    throw Error("crossover: parent length mismatch");
  Individual child;
  child.tokens.resize(a.tokens.size());
  child.ids.resize(a.ids.size());
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    const bool from_a = rng.next_double() < 0.5;
    child.tokens[i] = from_a ? a.tokens[i] : b.tokens[i];
    child.ids[i] = from_a ? a.ids[i] : b.ids[i];
  }
  return child;
}

GeneticResult genetic_search(const AttackContext& ctx,
                             const SynonymDictionary& dict,
                             const TargetInstance& target, const Example& base,
                             int base_index, const GeneticConfig& cfg,
                             SearchTrace* trace) {
  cfg.validate();
  target.validate();
  if (base.label != target.target_class)
    throw Error("genetic_search: base label must equal the target class");
  if (base.tokens.empty()) throw Error("genetic_search: empty base");

  const ConstraintSpec spec{cfg.delta, cfg.rho, cfg.max_sub_fraction};
  const FeatureVector ht = encode(ctx.encoder, ctx.vocab, target.example);
  const FeatureVector hb = encode(ctx.encoder, ctx.vocab, base);
  const double base_ppl = perplexity(ctx.lm, base);
  const double base_fitness = (hb - ht).squaredNorm();
  const std::size_t n = base.tokens.size();

  auto finalize = [&](const Individual& ind, double fit) {
    PoisonedExample p;
    p.tokens = ind.tokens;
    p.label = target.target_class;
    p.base_index = base_index;
    p.fitness = fit;
    p.base_fitness = base_fitness;
    for (std::size_t i = 0; i < n; ++i)
      if (ind.tokens[i] != base.tokens[i])
        p.substituted_positions.push_back(static_cast<int>(i));
    p.substitution_count = static_cast<int>(p.substituted_positions.size());
    const ConstraintEval ev =
        check_constraints(ctx, base, base_ppl, hb, ind.tokens, spec);
    p.similarity = ev.similarity;
    p.ppl_ratio = ev.ppl_ratio;
    return p;
  };

  // A base that already collides exactly cannot be improved on.
  if (base_fitness == 0.0) {
    GeneticResult r;
    r.status = SearchStatus::kSuccess;
    r.poison = finalize(make_base_individual(ctx, base), 0.0);
    r.best_fitness_history.assign(static_cast<std::size_t>(cfg.iterations), 0.0);
    return r;
  }

  const Eigen::VectorXd probs =
      substitution_probability(ctx, base, target.example);

  // Per-child RNG streams indexed by (generation, child) keep sequential and
  // parallel evaluation identical.
  auto child_rng = [&cfg](int generation, int child) {
    return Rng(Rng::mix(Rng::mix(cfg.seed, static_cast<std::uint64_t>(generation)),
                        static_cast<std::uint64_t>(child)));
  };

  std::vector<Individual> population;
  population.reserve(static_cast<std::size_t>(cfg.population));
  for (int i = 0; i < cfg.population; ++i) {
    Rng rng = child_rng(0, i);
    population.push_back(perturb(ctx, dict, base, base_ppl, hb, ht, probs, spec, rng));
  }

  GeneticResult result;
  double f_best = std::numeric_limits<double>::infinity();
  Individual best;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    Eigen::VectorXd fitness(cfg.population);
    for (int i = 0; i < cfg.population; ++i) {
      Individual& ind = population[static_cast<std::size_t>(i)];
      ind.fitness = (encode_ids(ctx.encoder, ind.ids) - ht).squaredNorm();
      fitness[i] = ind.fitness;
      if (ind.fitness < f_best &&
          check_constraints(ctx, base, base_ppl, hb, ind.tokens, spec).ok) {
        f_best = ind.fitness;
        best = ind;
      }
    }
    result.best_fitness_history.push_back(f_best);
    if (trace) trace->generations.push_back(population);

    // Parents are sampled so that closer (lower-fitness) individuals are
    // more likely: Q = softmax(-f / T).
    const Eigen::VectorXd q = softmax((-fitness / cfg.temperature).eval());
    std::vector<double> qw(q.data(), q.data() + q.size());

    std::vector<Individual> next;
    next.reserve(static_cast<std::size_t>(cfg.population));
    for (int i = 0; i < cfg.population; ++i) {
      Rng rng = child_rng(iter + 1, i);
      const Individual& p1 = population[rng.next_discrete(qw)];
      const Individual& p2 = population[rng.next_discrete(qw)];
      Individual child = crossover(p1, p2, rng);
      child.substitutions = count_substitutions(child.tokens, base);

      // Repair: revert random substituted positions until constraints pass.
      while (!check_constraints(ctx, base, base_ppl, hb, child.tokens, spec).ok) {
        std::vector<std::size_t> subs;
        for (std::size_t pos = 0; pos < n; ++pos)
          if (child.tokens[pos] != base.tokens[pos]) subs.push_back(pos);
        if (subs.empty()) break;  // fully reverted; the base always passes
        const std::size_t pos = subs[rng.next_index(subs.size())];
        child.tokens[pos] = base.tokens[pos];
        child.ids[pos] = ctx.vocab.lookup(base.tokens[pos]);
        --child.substitutions;
      }
      next.push_back(std::move(child));
    }
    population = std::move(next);
  }

  if (!std::isfinite(f_best)) {
    result.status = SearchStatus::kNoPassingIndividual;
    return result;
  }
  result.status = SearchStatus::kSuccess;
  result.poison = finalize(best, f_best);
  return result;
}

GeneticResult genetic_search(const AttackContext& ctx, const WordVectors& v,
                             const TargetInstance& target, const Example& base,
                             int base_index, const GeneticConfig& cfg,
                             SearchTrace* trace) {
  const SynonymDictionary dict =
      build_dictionary(v, ctx.lm, base, cfg.k_syn, cfg.max_cos_dist);
  return genetic_search(ctx, dict, target, base, base_index, cfg, trace);
}

std::vector<PoisonedExample> final_selection(std::vector<PoisonedExample> pool,
                                             std::size_t p_size) {
  if (pool.empty()) throw Error("final_selection: empty candidate list");
  std::sort(pool.begin(), pool.end(),
            [](const PoisonedExample& a, const PoisonedExample& b) {
              if (a.fitness != b.fitness) return a.fitness < b.fitness;
              return a.base_index < b.base_index;
            });
  if (pool.size() > p_size) pool.resize(p_size);
  return pool;
}

Dataset badnet_poison(const Dataset& train, const std::vector<Token>& trigger,
                      double rate, int target_class, std::uint64_t seed) {
  if (!(rate > 0.0 && rate < 1.0))
    throw Error("badnet_poison: rate must be in (0, 1)");
  if (trigger.empty()) throw Error("badnet_poison: empty trigger list");
  for (const auto& t : trigger)
    if (t.empty()) throw Error("badnet_poison: empty trigger token");
  if (target_class < 0 || target_class >= train.class_count)
    throw Error("badnet_poison: target class out of range");
  if (train.examples.empty()) throw Error("badnet_poison: empty dataset");

  const auto n = train.examples.size();
  const auto count = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.next_index(i)]);

  Dataset out = train;
  for (std::size_t i = 0; i < count && i < n; ++i) {
    Example& e = out.examples[order[i]];
    const Token& tok = trigger[rng.next_index(trigger.size())];
    const std::size_t pos = rng.next_index(e.tokens.size() + 1);
    e.tokens.insert(e.tokens.begin() + static_cast<long>(pos), tok);
    e.label = target_class;
  }
  return out;
}

Example insert_trigger(const Example& x, const std::vector<Token>& trigger,
                       Rng& rng) {
  if (trigger.empty()) throw Error("insert_trigger: empty trigger list");
  Example out = x;
  const Token& tok = trigger[rng.next_index(trigger.size())];
  const std::size_t pos = rng.next_index(out.tokens.size() + 1);
  out.tokens.insert(out.tokens.begin() + static_cast<long>(pos), tok);
  return out;
}

}  // namespace clpoison
