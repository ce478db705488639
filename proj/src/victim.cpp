#include "clpoison/victim.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "clpoison/error.hpp"
#include "clpoison/io.hpp"
#include "clpoison/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace clpoison {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || learning_rate > 1.0)
    throw Error("TrainConfig: learning_rate must be in (0, 1]");
  if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
  if (epochs < 0) throw Error("TrainConfig: epochs must be >= 0");
  if (l2 < 0.0) throw Error("TrainConfig: l2 must be >= 0");
}

EncoderParams init_params(const Vocabulary& vocab, int d_emb, int d_h,
                          int class_count, std::uint64_t seed) {
  if (d_emb < 1 || d_h < 1 || class_count < 2)
    throw Error("init_params: bad dimensions");
  Rng rng(seed);
  EncoderParams p;
  auto gaussian = [&rng](Eigen::MatrixXd& m, long rows, long cols, double sd) {
    m.resize(rows, cols);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) m(i, j) = sd * rng.next_gaussian();
  };
  gaussian(p.embedding, vocab.size(), d_emb, 0.5);
  gaussian(p.w1, d_emb, d_h, 0.3);
  p.b1 = Eigen::VectorXd::Zero(d_h);
  gaussian(p.w2, d_h, class_count, 0.3);
  p.b2 = Eigen::VectorXd::Zero(class_count);
  p.vocab_hash = vocab.hash();
  return p;
}

namespace {

Eigen::VectorXd pooled_embedding(const EncoderParams& p,
                                 std::span<const int> ids) {
  if (ids.empty()) throw Error("encode: empty token list");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.embedding_dim());
  for (int id : ids) {
    if (id < 0 || id >= p.vocab_size()) throw Error("encode: token id out of range");
    x += p.embedding.row(id);
  }
  return x / static_cast<double>(ids.size());
}

Eigen::VectorXd softmax(Eigen::VectorXd z) {
  const double m = z.maxCoeff();
  z = (z.array() - m).exp();
  return z / z.sum();
}

}  // namespace

FeatureVector encode_ids(const EncoderParams& p, std::span<const int> ids) {
  const Eigen::VectorXd x = pooled_embedding(p, ids);
  return (p.w1.transpose() * x + p.b1).array().tanh();
}

FeatureVector encode(const EncoderParams& p, const Vocabulary& vocab,
                     const Example& x) {
  return encode_ids(p, vocab.to_ids(x));
}

std::pair<int, Eigen::VectorXd> predict_ids(const EncoderParams& p,
                                            std::span<const int> ids) {
  const FeatureVector h = encode_ids(p, ids);
  Eigen::VectorXd probs = softmax(p.w2.transpose() * h + p.b2);
  int best = 0;
  for (int c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;  // ties keep the lowest index
  return {best, std::move(probs)};
}

std::pair<int, Eigen::VectorXd> predict(const EncoderParams& p,
                                        const Vocabulary& vocab,
                                        const Example& x) {
  return predict_ids(p, vocab.to_ids(x));
}

double accuracy(const EncoderParams& p, const Vocabulary& vocab,
                const Dataset& d) {
  if (d.examples.empty()) throw Error("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& e : d.examples)
    if (predict(p, vocab, e).first == e.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(d.examples.size());
}

namespace {

struct BatchForward {
  Eigen::MatrixXd x;      // B x d_emb pooled embeddings
  Eigen::MatrixXd h;      // B x d_h
  Eigen::MatrixXd probs;  // B x C
  double loss = 0.0;
};

BatchForward forward(const EncoderParams& p,
                     const std::vector<std::vector<int>>& ids,
                     std::span<const int> labels) {
  const auto b = static_cast<long>(ids.size());
  BatchForward f;
  f.x.resize(b, p.embedding_dim());
  for (long i = 0; i < b; ++i)
    f.x.row(i) = pooled_embedding(p, ids[static_cast<std::size_t>(i)]);
  f.h = ((f.x * p.w1).rowwise() + p.b1.transpose()).array().tanh();
  Eigen::MatrixXd z = (f.h * p.w2).rowwise() + p.b2.transpose();
  Eigen::VectorXd zmax = z.rowwise().maxCoeff();
  Eigen::MatrixXd ez = (z.colwise() - zmax).array().exp();
  f.probs = ez.array().colwise() / ez.rowwise().sum().array();
  double loss = 0.0;
  for (long i = 0; i < b; ++i)
    loss -= std::log(f.probs(i, labels[static_cast<std::size_t>(i)]));
  f.loss = loss / static_cast<double>(b);
  return f;
}

double backward(const EncoderParams& p,
                const std::vector<std::vector<int>>& ids,
                std::span<const int> labels, Gradients& g,
                bool need_embedding_grad = true) {
  BatchForward f = forward(p, ids, labels);
  const auto b = static_cast<long>(ids.size());
  const double inv_b = 1.0 / static_cast<double>(b);

  Eigen::MatrixXd dz = f.probs;
  for (long i = 0; i < b; ++i) dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz *= inv_b;

  g.w2 = f.h.transpose() * dz;
  g.b2 = dz.colwise().sum();
  Eigen::MatrixXd dh = dz * p.w2.transpose();
  Eigen::MatrixXd dpre = dh.array() * (1.0 - f.h.array().square());
  g.w1 = f.x.transpose() * dpre;
  g.b1 = dpre.colwise().sum();

  if (need_embedding_grad) {
    g.embedding = Eigen::MatrixXd::Zero(p.vocab_size(), p.embedding_dim());
    Eigen::MatrixXd dx = dpre * p.w1.transpose();  // B x d_emb
    for (long i = 0; i < b; ++i) {
      const auto& row_ids = ids[static_cast<std::size_t>(i)];
      const double scale = 1.0 / static_cast<double>(row_ids.size());
      for (int id : row_ids) g.embedding.row(id) += scale * dx.row(i);
    }
  }
  return f.loss;
}

}  // namespace

double batch_loss(const EncoderParams& p, const Vocabulary& vocab,
                  std::span<const Example> batch) {
  if (batch.empty()) throw Error("batch_loss: empty batch");
  std::vector<std::vector<int>> ids;
  std::vector<int> labels;
  for (const auto& e : batch) {
    ids.push_back(vocab.to_ids(e));
    labels.push_back(e.label);
  }
  return forward(p, ids, labels).loss;
}

double batch_loss_and_gradients(const EncoderParams& p, const Vocabulary& vocab,
                                std::span<const Example> batch, Gradients& g) {
  if (batch.empty()) throw Error("batch_loss_and_gradients: empty batch");
  std::vector<std::vector<int>> ids;
  std::vector<int> labels;
  for (const auto& e : batch) {
    ids.push_back(vocab.to_ids(e));
    labels.push_back(e.label);
  }
  return backward(p, ids, labels, g);
}

EncoderParams train(const Dataset& data, const Vocabulary& vocab,
                    const TrainConfig& cfg, const EncoderParams& init,
                    const Dataset* dev, TrainLog* log) {
  cfg.validate();
  if (data.examples.empty()) throw Error("train: empty dataset");
  if (init.class_count() != data.class_count)
    throw Error("train: class count mismatch between init and dataset");
  if (init.vocab_size() != vocab.size())
    throw Error("train: vocabulary size mismatch");

  EncoderParams p = init;
  const std::size_t n = data.examples.size();
  std::vector<std::vector<int>> all_ids(n);
  std::vector<int> all_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    all_ids[i] = vocab.to_ids(data.examples[i]);
    all_labels[i] = data.examples[i].label;
    if (all_labels[i] < 0 || all_labels[i] >= data.class_count)
      throw Error("train: label out of range");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed);
  Gradients g;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[rng.next_index(i)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::vector<int>> ids;
      std::vector<int> labels;
      ids.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        ids.push_back(all_ids[order[i]]);
        labels.push_back(all_labels[order[i]]);
      }
      const double loss = backward(p, ids, labels, g, !cfg.freeze_embeddings);
      if (!std::isfinite(loss))
        throw Error("train: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch " +
                    std::to_string(batches));
      epoch_loss += loss;
      ++batches;

      if (cfg.l2 > 0.0) {
        g.w1 += cfg.l2 * p.w1;
        g.w2 += cfg.l2 * p.w2;
      }
      p.w1 -= cfg.learning_rate * g.w1;
      p.b1 -= cfg.learning_rate * g.b1;
      p.w2 -= cfg.learning_rate * g.w2;
      p.b2 -= cfg.learning_rate * g.b2;
      if (!cfg.freeze_embeddings)
        p.embedding -= cfg.learning_rate * g.embedding;
    }
    if (log) log->train_loss.push_back(epoch_loss / static_cast<double>(batches));
    if (dev && log) log->dev_accuracy.push_back(accuracy(p, vocab, *dev));
  }
  return p;
}

EncoderParams train(const Dataset& data, const Vocabulary& vocab, int d_emb,
                    int d_h, const TrainConfig& cfg, const Dataset* dev,
                    TrainLog* log) {
  if (cfg.freeze_embeddings)
    throw Error("train: freeze_embeddings requires an explicit initialization");
  const EncoderParams init = init_params(
      vocab, d_emb, d_h, data.class_count, Rng::mix(cfg.seed, 0x1817));
  return train(data, vocab, cfg, init, dev, log);
}

namespace {

constexpr char kMagic[8] = {'C', 'L', 'P', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v, const char* what) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(std::string("checkpoint: truncated reading ") + what);
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) write_pod(out, m(i, j));
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m, long rows, long cols,
                 const char* what) {
  m.resize(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) read_pod(in, m(i, j), what);
}

}  // namespace

void save_checkpoint(const EncoderParams& p,
                     const std::filesystem::path& path) {
  atomic_write(path, [&p](std::ostream& out) {
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(p.vocab_size()));
    write_pod(out, static_cast<std::uint32_t>(p.embedding_dim()));
    write_pod(out, static_cast<std::uint32_t>(p.hidden_dim()));
    write_pod(out, static_cast<std::uint32_t>(p.class_count()));
    write_pod(out, p.vocab_hash);
    write_matrix(out, p.embedding);
    write_matrix(out, p.w1);
    write_matrix(out, Eigen::MatrixXd(p.b1));
    write_matrix(out, p.w2);
    write_matrix(out, Eigen::MatrixXd(p.b2));
  });
}

EncoderParams load_checkpoint(const std::filesystem::path& path,
                              std::uint64_t expected_vocab_hash) {
  auto in = open_input(path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0, v = 0, d_emb = 0, d_h = 0, c = 0;
  read_pod(in, version, "version");
  if (version != kVersion) throw Error("checkpoint: unsupported version");
  read_pod(in, v, "dims");
  read_pod(in, d_emb, "dims");
  read_pod(in, d_h, "dims");
  read_pod(in, c, "dims");
  if (v == 0 || d_emb == 0 || d_h == 0 || c < 2)
    throw Error("checkpoint: invalid dimensions");
  EncoderParams p;
  read_pod(in, p.vocab_hash, "vocab hash");
  if (p.vocab_hash != expected_vocab_hash)
    throw Error("checkpoint: vocabulary hash mismatch; model was trained "
                "against a different vocabulary");
  read_matrix(in, p.embedding, v, d_emb, "embedding");
  read_matrix(in, p.w1, d_emb, d_h, "w1");
  Eigen::MatrixXd tmp;
  read_matrix(in, tmp, d_h, 1, "b1");
  p.b1 = tmp.col(0);
  read_matrix(in, p.w2, d_h, c, "w2");
  read_matrix(in, tmp, c, 1, "b2");
  p.b2 = tmp.col(0);
  char extra;
  if (in.read(&extra, 1))
    throw Error("checkpoint: trailing bytes in " + path.string());
  return p;
}

}  // namespace clpoison
