#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpoison/corpus.hpp"
#include "clpoison/ngram.hpp"

namespace clpoison {

/// Static word vectors used to propose and filter substitution candidates.
struct WordVectors {
  std::vector<Token> tokens;
  Eigen::MatrixXd vectors;     // n x dim, raw
  Eigen::MatrixXd normalized;  // n x dim, unit rows (zero rows stay zero)
  std::unordered_map<Token, int> index;

  int dim() const { return static_cast<int>(vectors.cols()); }
  int size() const { return static_cast<int>(vectors.rows()); }
  bool contains(const Token& t) const { return index.count(t) > 0; }

  void rebuild_index();
};

struct Candidate {
  Token token;
  double score;  // cosine similarity, or context score after re-ranking
};

/// Per-position substitution lists for one sentence.
struct SynonymDictionary {
  std::vector<std::vector<Candidate>> per_position;
};

/// Text format: `token v1 v2 ... vd`, dimension inferred from the first line.
/// Duplicate tokens: the later line wins (warning recorded when a sink is
/// given).
WordVectors load_vectors(const std::filesystem::path& path,
                         std::vector<std::string>* warnings = nullptr);
void save_vectors(const WordVectors& v, const std::filesystem::path& path);

/// Top-k tokens by cosine similarity to w, excluding w itself and anything
/// with cosine distance above max_cos_dist. Ties broken lexicographically.
/// Unknown words yield an empty list.
std::vector<Candidate> nearest_synonyms(const WordVectors& v, const Token& w,
                                        int k_syn, double max_cos_dist);

/// Takes a 3*k_syn nearest-synonyms pool and re-ranks it in sentence context
/// by the n-gram context score, returning the top k_syn.
std::vector<Candidate> contextual_candidates(const WordVectors& v,
                                             const NGramModel& m,
                                             const Example& x,
                                             std::size_t position, int k_syn,
                                             double max_cos_dist);

SynonymDictionary build_dictionary(const WordVectors& v, const NGramModel& m,
                                   const Example& x, int k_syn,
                                   double max_cos_dist);

struct VectorTrainConfig {
  int dim = 50;
  int window = 5;
  int min_count = 2;
  int power_iterations = 3;
  int oversample = 10;
  std::uint64_t seed = 0;
};

/// Deterministic desk-scale vectors: positive PMI co-occurrence matrix over
/// the corpus, factored by seeded randomized SVD.
WordVectors train_word_vectors(const Dataset& corpus,
                               const VectorTrainConfig& cfg);

}  // namespace clpoison
