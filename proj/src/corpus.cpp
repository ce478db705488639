#include "clpoison/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "clpoison/io.hpp"
#include "clpoison/rng.hpp"

namespace clpoison {

const Token Vocabulary::kUnkToken = "<unk>";
const Token Vocabulary::kMaskToken = "<mask>";

double Dataset::mean_token_length() const {
  if (examples.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& e : examples) total += e.tokens.size();
  return static_cast<double>(total) / static_cast<double>(examples.size());
}

int Dataset::class_id(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<int>(i);
  return -1;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {kUnkToken, kMaskToken};
  token_to_id_ = {{kUnkToken, kUnkId}, {kMaskToken, kMaskId}};
  counts_ = {0, 0};
}

int Vocabulary::lookup(const Token& t) const {
  auto it = token_to_id_.find(t);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const Token& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw Error("Vocabulary::token: bad id");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : id_to_token_) eat(t);
  return h;
}

std::vector<int> Vocabulary::to_ids(const Example& x) const {
  std::vector<int> ids;
  ids.reserve(x.tokens.size());
  for (const auto& t : x.tokens) ids.push_back(lookup(t));
  return ids;
}

namespace {

std::string lowercased(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<Token> split_whitespace(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t j = i;
    while (j < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[j])))
      ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Dataset load_tsv_impl(const std::filesystem::path& path,
                      const std::vector<std::string>* fixed_classes) {
  auto in = open_input(path);
  Dataset d;
  if (fixed_classes) {
    d.class_names = *fixed_classes;
    d.class_count = static_cast<int>(fixed_classes->size());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": missing tab separator");
    std::string label = line.substr(tab + 1);
    Example e;
    e.tokens = split_whitespace(lowercased(line.substr(0, tab)));
    if (e.tokens.empty())
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": empty text field");
    if (label.empty())
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": empty label field");
    int id = d.class_id(label);
    if (id < 0) {
      if (fixed_classes)
        throw Error(path.string() + ":" + std::to_string(lineno) +
                    ": unknown label '" + label + "'");
      id = d.class_count++;
      d.class_names.push_back(label);
    }
    e.label = id;
    d.examples.push_back(std::move(e));
  }
  return d;
}

}  // namespace

Dataset load_tsv(const std::filesystem::path& path) {
  return load_tsv_impl(path, nullptr);
}

Dataset load_tsv(const std::filesystem::path& path,
                 const std::vector<std::string>& class_names) {
  return load_tsv_impl(path, &class_names);
}

void save_tsv(const Dataset& d, const std::filesystem::path& path) {
  atomic_write(path, [&d](std::ostream& out) {
    for (const auto& e : d.examples) {
      for (std::size_t i = 0; i < e.tokens.size(); ++i) {
        if (i) out << ' ';
        out << e.tokens[i];
      }
      out << '\t' << d.class_names.at(static_cast<std::size_t>(e.label))
          << '\n';
    }
  });
}

Vocabulary build_vocab(const Dataset& train, int min_count) {
  if (train.examples.empty()) throw Error("build_vocab: empty dataset");
  if (min_count < 1) throw Error("build_vocab: min_count must be >= 1");
  std::unordered_map<Token, std::int64_t> counts;
  for (const auto& e : train.examples)
    for (const auto& t : e.tokens) ++counts[t];

  std::vector<std::pair<Token, std::int64_t>> retained;
  retained.reserve(counts.size());
  for (auto& [tok, c] : counts) {
    if (c < min_count) continue;
    if (tok == Vocabulary::kUnkToken || tok == Vocabulary::kMaskToken) continue;
    retained.emplace_back(tok, c);
  }
  std::sort(retained.begin(), retained.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& [tok, c] : retained) {
    v.token_to_id_.emplace(tok, v.size());
    v.id_to_token_.push_back(tok);
    v.counts_.push_back(c);
  }
  return v;
}

void save_vocab(const Vocabulary& v, const std::filesystem::path& path) {
  atomic_write(path, [&v](std::ostream& out) {
    for (int id = 0; id < v.size(); ++id)
      out << v.token(id) << '\t' << id << '\t' << v.count(id) << '\n';
  });
}

SplitResult split(const Dataset& d, double f_train, double f_dev,
                  double f_test, std::uint64_t seed) {
  if (f_train <= 0.0 || f_dev <= 0.0 || f_test <= 0.0)
    throw Error("split: fractions must be positive");
  if (std::abs(f_train + f_dev + f_test - 1.0) > 1e-9)
    throw Error("split: fractions must sum to 1");

  const std::size_t n = d.examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
    std::size_t j = rng.next_index(i);
    std::swap(order[i - 1], order[j]);
  }

  const auto n_dev = static_cast<std::size_t>(f_dev * static_cast<double>(n));
  const auto n_test = static_cast<std::size_t>(f_test * static_cast<double>(n));
  const std::size_t n_train = n - n_dev - n_test;

  SplitResult r;
  for (Dataset* part : {&r.train, &r.dev, &r.test}) {
    part->class_count = d.class_count;
    part->class_names = d.class_names;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Example& e = d.examples[order[i]];
    if (i < n_train)
      r.train.examples.push_back(e);
    else if (i < n_train + n_dev)
      r.dev.examples.push_back(e);
    else
      r.test.examples.push_back(e);
  }
  return r;
}

}  // namespace clpoison
