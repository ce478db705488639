#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "clpoison/error.hpp"

namespace clpoison {

/// A token is a lowercase word with no embedded whitespace.
using Token = std::string;

/// One labeled sentence. Labels are dense 0-based class ids.
struct Example {
  std::vector<Token> tokens;
  int label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  int class_count = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return examples.size(); }
  double mean_token_length() const;
  /// Index of a class name, or -1 if unknown.
  int class_id(const std::string& name) const;
};

/// Token ids with two reserved sentinels. Ids are assigned by descending
/// corpus frequency, ties broken lexicographically, so construction is
/// deterministic. Tokens below min_count (and unseen tokens) map to kUnkId.
class Vocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr int kMaskId = 1;
  static const Token kUnkToken;   // "<unk>"
  static const Token kMaskToken;  // "<mask>"

  Vocabulary();

  int lookup(const Token& t) const;
  const Token& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  int min_count() const { return min_count_; }
  std::int64_t count(int id) const { return counts_[id]; }

  /// FNV-1a over the id-ordered token list; ties vocabularies to checkpoints.
  std::uint64_t hash() const;

  std::vector<int> to_ids(const Example& x) const;

  friend Vocabulary build_vocab(const Dataset& train, int min_count);

 private:
  std::unordered_map<Token, int> token_to_id_;
  std::vector<Token> id_to_token_;
  std::vector<std::int64_t> counts_;
  int min_count_ = 1;
};

/// Loads `text<TAB>label` lines; tokens are whitespace-split lowercased text,
/// labels mapped to dense ids in first-seen order.
Dataset load_tsv(const std::filesystem::path& path);

/// Same, but labels must come from a fixed class-name list (used to keep
/// test/poison files aligned with the training set's mapping).
Dataset load_tsv(const std::filesystem::path& path,
                 const std::vector<std::string>& class_names);

void save_tsv(const Dataset& d, const std::filesystem::path& path);

Vocabulary build_vocab(const Dataset& train, int min_count);

void save_vocab(const Vocabulary& v, const std::filesystem::path& path);

struct SplitResult {
  Dataset train, dev, test;
};

/// Deterministic shuffle + partition. Sizes are floor allocations for dev and
/// test with the remainder going to train.
SplitResult split(const Dataset& d, double f_train, double f_dev,
                  double f_test, std::uint64_t seed);

}  // namespace clpoison
