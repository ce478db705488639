#include "clpoison/synonyms.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "clpoison/error.hpp"
#include "clpoison/io.hpp"
#include "clpoison/rng.hpp"

namespace clpoison {

void WordVectors::rebuild_index() {
  index.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i)
    index[tokens[i]] = static_cast<int>(i);
  normalized = vectors;
  for (long i = 0; i < normalized.rows(); ++i) {
    const double n = normalized.row(i).norm();
    if (n > 0.0) normalized.row(i) /= n;
  }
}

WordVectors load_vectors(const std::filesystem::path& path,
                         std::vector<std::string>* warnings) {
  auto in = open_input(path);
  std::vector<Token> tokens;
  std::vector<std::vector<double>> rows;
  std::unordered_map<Token, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  long dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Token tok;
    if (!(ls >> tok))
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad line");
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (vals.empty())
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": no vector components");
    if (dim < 0) dim = static_cast<long>(vals.size());
    if (static_cast<long>(vals.size()) != dim)
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": inconsistent dimension (expected " + std::to_string(dim) +
                  ", got " + std::to_string(vals.size()) + ")");
    auto it = seen.find(tok);
    if (it != seen.end()) {
      rows[it->second] = std::move(vals);  // later line wins
      if (warnings)
        warnings->push_back("duplicate vector for token '" + tok + "' at line " +
                            std::to_string(lineno) + "; keeping the later one");
      continue;
    }
    seen.emplace(tok, rows.size());
    tokens.push_back(tok);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw Error(path.string() + ": empty vector file");

  WordVectors wv;
  wv.tokens = std::move(tokens);
  wv.vectors.resize(static_cast<long>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (long j = 0; j < dim; ++j)
      wv.vectors(static_cast<long>(i), j) = rows[i][static_cast<std::size_t>(j)];
  wv.rebuild_index();
  return wv;
}

void save_vectors(const WordVectors& v, const std::filesystem::path& path) {
  atomic_write(path, [&v](std::ostream& out) {
    char buf[32];
    for (int i = 0; i < v.size(); ++i) {
      out << v.tokens[static_cast<std::size_t>(i)];
      for (long j = 0; j < v.vectors.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", v.vectors(i, j));
        out << ' ' << buf;
      }
      out << '\n';
    }
  });
}

std::vector<Candidate> nearest_synonyms(const WordVectors& v, const Token& w,
                                        int k_syn, double max_cos_dist) {
  if (k_syn < 0) throw Error("nearest_synonyms: k_syn must be >= 0");
  if (max_cos_dist < 0.0 || max_cos_dist >= 1.0)
    throw Error("nearest_synonyms: max_cos_dist must be in [0, 1)");
  auto it = v.index.find(w);
  if (it == v.index.end()) return {};

  const Eigen::VectorXd sims = v.normalized * v.normalized.row(it->second).transpose();
  const double min_sim = 1.0 - max_cos_dist;
  std::vector<int> idx;
  for (int i = 0; i < v.size(); ++i) {
    if (i == it->second) continue;
    if (v.tokens[static_cast<std::size_t>(i)] == w) continue;
    if (sims[i] + 1e-12 < min_sim) continue;
    idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return v.tokens[static_cast<std::size_t>(a)] <
           v.tokens[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(idx.size()) > k_syn) idx.resize(static_cast<std::size_t>(k_syn));

  std::vector<Candidate> out;
  out.reserve(idx.size());
  for (int i : idx)
    out.push_back({v.tokens[static_cast<std::size_t>(i)], sims[i]});
  return out;
}

std::vector<Candidate> contextual_candidates(const WordVectors& v,
                                             const NGramModel& m,
                                             const Example& x,
                                             std::size_t position, int k_syn,
                                             double max_cos_dist) {
  if (position >= x.tokens.size())
    throw Error("contextual_candidates: position out of range");
  std::vector<Candidate> pool =
      nearest_synonyms(v, x.tokens[position], 3 * k_syn, max_cos_dist);
  for (auto& c : pool) c.score = context_score(m, x, position, c.token);
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.token < b.token;
  });
  if (static_cast<int>(pool.size()) > k_syn)
    pool.resize(static_cast<std::size_t>(k_syn));
  return pool;
}

SynonymDictionary build_dictionary(const WordVectors& v, const NGramModel& m,
                                   const Example& x, int k_syn,
                                   double max_cos_dist) {
  SynonymDictionary d;
  d.per_position.reserve(x.tokens.size());
  for (std::size_t i = 0; i < x.tokens.size(); ++i)
    d.per_position.push_back(
        contextual_candidates(v, m, x, i, k_syn, max_cos_dist));
  return d;
}

WordVectors train_word_vectors(const Dataset& corpus,
                               const VectorTrainConfig& cfg) {
  if (corpus.examples.empty()) throw Error("train_word_vectors: empty corpus");
  if (cfg.dim < 1 || cfg.window < 1 || cfg.min_count < 1 ||
      cfg.power_iterations < 0 || cfg.oversample < 0)
    throw Error("train_word_vectors: bad configuration");

  // token counts and retained vocabulary, deterministic order
  std::unordered_map<Token, std::int64_t> counts;
  for (const auto& e : corpus.examples)
    for (const auto& t : e.tokens) ++counts[t];
  std::vector<Token> toks;
  for (const auto& [t, c] : counts)
    if (c >= cfg.min_count) toks.push_back(t);
  std::sort(toks.begin(), toks.end());
  const long n = static_cast<long>(toks.size());
  if (n < 2) throw Error("train_word_vectors: not enough frequent tokens");
  std::unordered_map<Token, int> vi;
  for (long i = 0; i < n; ++i) vi[toks[static_cast<std::size_t>(i)]] = static_cast<int>(i);

  // symmetric window co-occurrence
  std::unordered_map<std::uint64_t, double> cooc;
  std::vector<double> margin(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (const auto& e : corpus.examples) {
    std::vector<int> ids;
    ids.reserve(e.tokens.size());
    for (const auto& t : e.tokens) {
      auto it = vi.find(t);
      ids.push_back(it == vi.end() ? -1 : it->second);
    }
    const long len = static_cast<long>(ids.size());
    for (long i = 0; i < len; ++i) {
      if (ids[static_cast<std::size_t>(i)] < 0) continue;
      const long lo = std::max<long>(0, i - cfg.window);
      const long hi = std::min<long>(len - 1, i + cfg.window);
      for (long j = lo; j <= hi; ++j) {
        if (j == i || ids[static_cast<std::size_t>(j)] < 0) continue;
        const std::uint64_t key =
            (static_cast<std::uint64_t>(ids[static_cast<std::size_t>(i)]) << 32) |
            static_cast<std::uint32_t>(ids[static_cast<std::size_t>(j)]);
        cooc[key] += 1.0;
        margin[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total <= 0.0) throw Error("train_word_vectors: no co-occurrences");

  // positive PMI, sparse
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(cooc.size());
  for (const auto& [key, c] : cooc) {
    const auto a = static_cast<long>(key >> 32);
    const auto b = static_cast<long>(key & 0xffffffffULL);
    const double pmi =
        std::log((c / total) / ((margin[static_cast<std::size_t>(a)] / total) *
                                (margin[static_cast<std::size_t>(b)] / total)));
    if (pmi > 0.0) trips.emplace_back(a, b, pmi);
  }
  Eigen::SparseMatrix<double> ppmi(n, n);
  ppmi.setFromTriplets(trips.begin(), trips.end());

  // randomized truncated SVD (subspace iteration on the symmetric PPMI)
  const long r = std::min<long>(n, cfg.dim + cfg.oversample);
  Rng rng(cfg.seed);
  Eigen::MatrixXd g(n, r);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < r; ++j) g(i, j) = rng.next_gaussian();
  Eigen::MatrixXd y = ppmi * g;
  for (int it = 0; it < cfg.power_iterations; ++it) {
    y = Eigen::HouseholderQR<Eigen::MatrixXd>(y).householderQ() *
        Eigen::MatrixXd::Identity(n, r);
    y = ppmi * (ppmi.transpose() * y);
  }
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(y).householderQ() *
      Eigen::MatrixXd::Identity(n, r);
  const Eigen::MatrixXd b = q.transpose() * ppmi;  // r x n
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const long d = std::min<long>(cfg.dim, svd.singularValues().size());

  WordVectors wv;
  wv.tokens = toks;
  wv.vectors = (q * svd.matrixU().leftCols(d)) *
               svd.singularValues().head(d).array().sqrt().matrix().asDiagonal();
  if (d < cfg.dim) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(n, cfg.dim);
    padded.leftCols(d) = wv.vectors;
    wv.vectors = padded;
  }
  wv.rebuild_index();
  return wv;
}

}  // namespace clpoison
