#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>

#include "clpoison/corpus.hpp"

namespace clpoison {

/// Add-k smoothed n-gram model with sentence-boundary padding. Conditionals
/// are normalized over the event space (retained vocabulary tokens plus UNK;
/// the MASK sentinel is excluded), so for any context the probabilities sum
/// to exactly 1. The model keeps a reference to the vocabulary it was fit
/// with; that vocabulary must outlive the model.
class NGramModel {
 public:
  static constexpr int kMaxOrder = 4;

  int order() const { return order_; }
  double k() const { return k_; }
  const Vocabulary& vocab() const { return *vocab_; }
  int bos_id() const { return bos_id_; }
  /// Size of the normalization space (vocabulary size minus MASK).
  int event_space() const { return event_space_; }

  /// log p(word | context); context holds exactly order-1 ids and may
  /// contain the BOS padding id.
  double cond_log_prob(std::span<const int> context, int word) const;

  std::int64_t ngram_count(std::span<const int> context, int word) const;
  std::int64_t context_total(std::span<const int> context) const;

  friend NGramModel fit_ngram(const Dataset& corpus, const Vocabulary& vocab,
                              int order, double k);
  friend void save_ngram(const NGramModel& m, const std::filesystem::path& p);
  friend NGramModel load_ngram(const std::filesystem::path& p,
                               const Vocabulary& vocab);

 private:
  std::uint64_t pack(std::span<const int> context, int word) const;
  std::uint64_t pack_ctx(std::span<const int> context) const;

  int order_ = 0;
  double k_ = 0.0;
  int bos_id_ = 0;
  int event_space_ = 0;
  const Vocabulary* vocab_ = nullptr;
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
  std::unordered_map<std::uint64_t, std::int64_t> ctx_totals_;
};

NGramModel fit_ngram(const Dataset& corpus, const Vocabulary& vocab, int order,
                     double k);

/// exp of the mean negative log conditional probability over the padded
/// sentence (every token is predicted; BOS padding provides left context).
double perplexity(const NGramModel& m, const Example& x);

/// Log probability of the sentence with `candidate` substituted at
/// `position`, restricted to the n-gram windows covering that position.
/// Differences between candidates equal full-sentence log-probability
/// differences exactly.
double context_score(const NGramModel& m, const Example& x,
                     std::size_t position, const Token& candidate);

/// Text dump: `order k` header then `ngram<TAB>count` lines; reload is exact.
void save_ngram(const NGramModel& m, const std::filesystem::path& path);
NGramModel load_ngram(const std::filesystem::path& path,
                      const Vocabulary& vocab);

}  // namespace clpoison
