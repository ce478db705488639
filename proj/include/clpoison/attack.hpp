#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "clpoison/corpus.hpp"
#include "clpoison/ngram.hpp"
#include "clpoison/synonyms.hpp"
#include "clpoison/victim.hpp"

namespace clpoison {

class Rng;

/// The test instance the attacker wants misclassified, and the class the
/// backdoored model should output for it.
struct TargetInstance {
  Example example;
  int target_class = 0;

  void validate() const;
};

/// One perturbed-sentence candidate in the genetic population. Tokens stay
/// position-aligned with the base sentence; token ids are cached for the
/// encoder hot path.
struct Individual {
  std::vector<Token> tokens;
  std::vector<int> ids;
  double fitness = 0.0;  // squared L2 feature distance to the target
  int substitutions = 0;
  bool perturbed = true;  // false when a perturb call had to fall back to base
};

struct GeneticConfig {
  int population = 20;      // N
  int iterations = 15;      // M
  int candidate_pool = 50;  // K, base instances taken per target
  int k_syn = 60;
  double max_cos_dist = 0.4;
  double delta = 0.85;           // encoder-cosine similarity floor
  double rho = 1.2;              // relative perplexity ceiling
  double max_sub_fraction = 0.25;
  double temperature = 1.0;      // selection softmax temperature
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoisonedExample {
  std::vector<Token> tokens;
  int label = 0;  // always the target class
  int base_index = -1;
  double fitness = 0.0;
  double base_fitness = 0.0;
  int substitution_count = 0;
  std::vector<int> substituted_positions;
  double similarity = 1.0;  // to the base sentence
  double ppl_ratio = 1.0;

  Example to_example() const { return {tokens, label}; }
};

/// Read-only bundle threaded through the attack operations.
struct AttackContext {
  const EncoderParams& encoder;
  const Vocabulary& vocab;
  const NGramModel& lm;
};

struct CandidateRef {
  int train_index = -1;
  double distance = 0.0;
};

/// Numerically stable softmax (shift-invariant).
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Squared L2 distance between encoder features of two token sequences.
double feature_distance(const AttackContext& ctx, std::span<const int> a_ids,
                        std::span<const int> b_ids);

/// Encoder-cosine similarity between two sentences; zero-norm features give 0.
double similarity(const EncoderParams& p, const Vocabulary& vocab,
                  const Example& a, const Example& b);

/// Training examples of the target class ordered by ascending feature
/// distance to the target (ties by dataset index), at most k of them.
std::vector<CandidateRef> select_candidates(const EncoderParams& p,
                                            const Vocabulary& vocab,
                                            const Dataset& train,
                                            const TargetInstance& target,
                                            int k);

/// Saliency S_i: reduction of the base-to-target feature distance when
/// position i is masked. Larger means masking position i gets the base
/// closer to the target, so substituting there is more promising.
Eigen::VectorXd substitution_saliency(const AttackContext& ctx,
                                      const Example& x_k, const Example& x_t);

/// softmax(S): the per-position substitution distribution.
Eigen::VectorXd substitution_probability(const AttackContext& ctx,
                                         const Example& x_k,
                                         const Example& x_t);

struct ConstraintSpec {
  double delta = 0.85;
  double rho = 1.2;
  double max_sub_fraction = 0.25;
};

struct ConstraintEval {
  bool ok = false;
  double similarity = 0.0;
  double ppl_ratio = 0.0;
  double sub_fraction = 0.0;
  int substitutions = 0;
};

/// Re-checkable constraint evaluation of `tokens` against its base sentence.
ConstraintEval check_constraints(const AttackContext& ctx,
                                 const Example& base, double base_ppl,
                                 const FeatureVector& base_features,
                                 const std::vector<Token>& tokens,
                                 const ConstraintSpec& spec);

/// Single-substitution perturbation of the base: samples a position from P
/// (restricted to positions with candidates), then takes the
/// constraint-passing candidate closest to the target in feature space.
/// Falls back to an unperturbed copy of the base (flagged) when no position
/// or candidate works.
Individual perturb(const AttackContext& ctx, const SynonymDictionary& dict,
                   const Example& base, double base_ppl,
                   const FeatureVector& base_features,
                   const FeatureVector& target_features,
                   const Eigen::VectorXd& position_probs,
                   const ConstraintSpec& spec, Rng& rng);

/// Uniform per-position mix of two aligned parents.
Individual crossover(const Individual& a, const Individual& b, Rng& rng);

enum class SearchStatus { kSuccess, kNoPassingIndividual };

struct GeneticResult {
  SearchStatus status = SearchStatus::kNoPassingIndividual;
  std::optional<PoisonedExample> poison;
  std::vector<double> best_fitness_history;  // per iteration, non-increasing
};

/// Full populations per generation, for invariant checks.
struct SearchTrace {
  std::vector<std::vector<Individual>> generations;
};

GeneticResult genetic_search(const AttackContext& ctx,
                             const SynonymDictionary& dict,
                             const TargetInstance& target, const Example& base,
                             int base_index, const GeneticConfig& cfg,
                             SearchTrace* trace = nullptr);

/// Convenience overload that builds the per-position dictionary itself.
GeneticResult genetic_search(const AttackContext& ctx, const WordVectors& v,
                             const TargetInstance& target, const Example& base,
                             int base_index, const GeneticConfig& cfg,
                             SearchTrace* trace = nullptr);

/// The p_size lowest-fitness poisons, ascending, ties by base index.
std::vector<PoisonedExample> final_selection(std::vector<PoisonedExample> pool,
                                             std::size_t p_size);

/// Dirty-label baseline: for a seeded random ceil(rate*|train|) subset,
/// inserts one trigger token at a uniform position and flips the label to
/// the target class. Returns the dataset with that subset modified.
Dataset badnet_poison(const Dataset& train, const std::vector<Token>& trigger,
                      double rate, int target_class, std::uint64_t seed);

/// Inserts one trigger token (chosen from the list) at a seeded uniform
/// position; used at test time when evaluating the baseline.
Example insert_trigger(const Example& x, const std::vector<Token>& trigger,
                       Rng& rng);

}  // namespace clpoison
