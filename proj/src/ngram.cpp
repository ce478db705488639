#include "clpoison/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "clpoison/error.hpp"
#include "clpoison/io.hpp"

namespace clpoison {

namespace {

const std::string kBosToken = "<s>";

// Text never legitimately contains the MASK sentinel; fold it into UNK so
// the event space stays consistent.
int normalized_id(int id) {
  return id == Vocabulary::kMaskId ? Vocabulary::kUnkId : id;
}

std::vector<int> padded_ids(const NGramModel& m, const Example& x) {
  const auto& vocab = m.vocab();
  std::vector<int> ids;
  ids.reserve(x.tokens.size() + static_cast<std::size_t>(m.order() - 1));
  for (int i = 0; i < m.order() - 1; ++i) ids.push_back(m.bos_id());
  for (const auto& t : x.tokens)
    ids.push_back(normalized_id(vocab.lookup(t)));
  return ids;
}

}  // namespace

std::uint64_t NGramModel::pack(std::span<const int> context, int word) const {
  std::uint64_t key = static_cast<std::uint16_t>(word);
  for (int c : context) key = (key << 16) | static_cast<std::uint16_t>(c);
  return key;
}

std::uint64_t NGramModel::pack_ctx(std::span<const int> context) const {
  std::uint64_t key = 1;  // non-zero tag keeps the empty context distinct
  for (int c : context) key = (key << 16) | static_cast<std::uint16_t>(c);
  return key;
}

double NGramModel::cond_log_prob(std::span<const int> context, int word) const {
  if (static_cast<int>(context.size()) != order_ - 1)
    throw Error("cond_log_prob: context size must equal order-1");
  const auto cit = counts_.find(pack(context, word));
  const auto tit = ctx_totals_.find(pack_ctx(context));
  const double c = cit == counts_.end() ? 0.0 : static_cast<double>(cit->second);
  const double t =
      tit == ctx_totals_.end() ? 0.0 : static_cast<double>(tit->second);
  return std::log((c + k_) / (t + k_ * static_cast<double>(event_space_)));
}

std::int64_t NGramModel::ngram_count(std::span<const int> context,
                                     int word) const {
  const auto it = counts_.find(pack(context, word));
  return it == counts_.end() ? 0 : it->second;
}

std::int64_t NGramModel::context_total(std::span<const int> context) const {
  const auto it = ctx_totals_.find(pack_ctx(context));
  return it == ctx_totals_.end() ? 0 : it->second;
}

NGramModel fit_ngram(const Dataset& corpus, const Vocabulary& vocab, int order,
                     double k) {
  if (order < 1 || order > NGramModel::kMaxOrder)
    throw Error("fit_ngram: order must be in [1, 4]");
  if (!(k > 0.0)) throw Error("fit_ngram: smoothing k must be positive");
  if (corpus.examples.empty()) throw Error("fit_ngram: empty corpus");
  if (vocab.size() >= 65535)
    throw Error("fit_ngram: vocabulary too large for packed n-gram keys");

  NGramModel m;
  m.order_ = order;
  m.k_ = k;
  m.vocab_ = &vocab;
  m.bos_id_ = vocab.size();
  m.event_space_ = vocab.size() - 1;  // all ids except MASK

  for (const auto& e : corpus.examples) {
    const std::vector<int> ids = padded_ids(m, e);
    for (std::size_t i = static_cast<std::size_t>(order - 1); i < ids.size();
         ++i) {
      std::span<const int> ctx(ids.data() + i - (order - 1),
                               static_cast<std::size_t>(order - 1));
      ++m.counts_[m.pack(ctx, ids[i])];
      ++m.ctx_totals_[m.pack_ctx(ctx)];
    }
  }
  return m;
}

double perplexity(const NGramModel& m, const Example& x) {
  if (x.tokens.empty()) throw Error("perplexity: empty sentence");
  const std::vector<int> ids = padded_ids(m, x);
  const auto n = x.tokens.size();
  const std::size_t off = static_cast<std::size_t>(m.order() - 1);
  double total = 0.0;
  for (std::size_t i = off; i < ids.size(); ++i) {
    std::span<const int> ctx(ids.data() + i - off, off);
    total += m.cond_log_prob(ctx, ids[i]);
  }
  return std::exp(-total / static_cast<double>(n));
}

double context_score(const NGramModel& m, const Example& x,
                     std::size_t position, const Token& candidate) {
  if (x.tokens.empty()) throw Error("context_score: empty sentence");
  if (position >= x.tokens.size())
    throw Error("context_score: position out of range");
  std::vector<int> ids = padded_ids(m, x);
  const std::size_t off = static_cast<std::size_t>(m.order() - 1);
  ids[off + position] =
      normalized_id(m.vocab().lookup(candidate));

  const std::size_t first = off + position;
  const std::size_t last =
      std::min(ids.size() - 1, first + off);  // windows covering `position`
  double total = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    std::span<const int> ctx(ids.data() + i - off, off);
    total += m.cond_log_prob(ctx, ids[i]);
  }
  return total;
}

void save_ngram(const NGramModel& m, const std::filesystem::path& path) {
  std::vector<std::uint64_t> keys;
  keys.reserve(m.counts_.size());
  for (const auto& [key, _] : m.counts_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  atomic_write(path, [&](std::ostream& out) {
    char kbuf[32];
    std::snprintf(kbuf, sizeof(kbuf), "%.17g", m.k_);
    out << m.order_ << ' ' << kbuf << '\n';
    for (std::uint64_t key : keys) {
      // unpack: word is in the high slot, context below it
      std::vector<int> parts(static_cast<std::size_t>(m.order_));
      std::uint64_t k = key;
      for (int i = m.order_ - 1; i >= 1; --i) {
        parts[static_cast<std::size_t>(i)] = static_cast<int>(k & 0xffff);
        k >>= 16;
      }
      parts[0] = static_cast<int>(k & 0xffff);
      // parts = [word, ctx...]; emit context order then word
      for (int i = 1; i < m.order_; ++i) {
        const int id = parts[static_cast<std::size_t>(i)];
        out << (id == m.bos_id_ ? kBosToken : m.vocab_->token(id)) << ' ';
      }
      out << m.vocab_->token(parts[0]) << '\t' << m.counts_.at(key) << '\n';
    }
  });
}

NGramModel load_ngram(const std::filesystem::path& path,
                      const Vocabulary& vocab) {
  auto in = open_input(path);
  std::string header;
  if (!std::getline(in, header)) throw Error("load_ngram: empty file");
  std::istringstream hs(header);
  int order = 0;
  double k = 0.0;
  if (!(hs >> order >> k)) throw Error("load_ngram: bad header");
  if (order < 1 || order > NGramModel::kMaxOrder)
    throw Error("load_ngram: bad order");

  NGramModel m;
  m.order_ = order;
  m.k_ = k;
  m.vocab_ = &vocab;
  m.bos_id_ = vocab.size();
  m.event_space_ = vocab.size() - 1;

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("load_ngram:" + std::to_string(lineno) + ": missing tab");
    std::istringstream ts(line.substr(0, tab));
    std::vector<int> ids;
    std::string tok;
    while (ts >> tok) {
      if (tok == kBosToken) {
        ids.push_back(m.bos_id_);
      } else {
        const int id = vocab.lookup(tok);
        if (id == Vocabulary::kUnkId && tok != Vocabulary::kUnkToken)
          throw Error("load_ngram:" + std::to_string(lineno) +
                      ": token not in vocabulary: " + tok);
        ids.push_back(id);
      }
    }
    if (static_cast<int>(ids.size()) != order)
      throw Error("load_ngram:" + std::to_string(lineno) + ": expected " +
                  std::to_string(order) + " tokens");
    const std::int64_t count = std::stoll(line.substr(tab + 1));
    std::span<const int> ctx(ids.data(), ids.size() - 1);
    m.counts_[m.pack(ctx, ids.back())] += count;
    m.ctx_totals_[m.pack_ctx(ctx)] += count;
  }
  return m;
}

}  // namespace clpoison
