#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "clpoison/corpus.hpp"

namespace clpoison {

/// Penultimate representation of the victim; the space in which poisons are
/// optimized to collide with the target.
using FeatureVector = Eigen::VectorXd;

/// Mean-pooled embedding bag -> tanh hidden layer -> linear -> softmax.
struct EncoderParams {
  Eigen::MatrixXd embedding;  // vocab_size x d_emb
  Eigen::MatrixXd w1;         // d_emb x d_h
  Eigen::VectorXd b1;         // d_h
  Eigen::MatrixXd w2;         // d_h x class_count
  Eigen::VectorXd b2;         // class_count
  std::uint64_t vocab_hash = 0;

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int embedding_dim() const { return static_cast<int>(embedding.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int class_count() const { return static_cast<int>(w2.cols()); }
};

struct TrainConfig {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool freeze_embeddings = false;
  double l2 = 0.0;  // optional weight decay on w1/w2, off by default

  void validate() const;
};

struct TrainLog {
  std::vector<double> train_loss;    // per epoch, mean cross-entropy
  std::vector<double> dev_accuracy;  // per epoch, present when dev given
};

/// Gaussian init: embeddings N(0, 0.5^2), weights N(0, 0.3^2), zero biases.
/// The scales keep initial tanh pre-activations in the responsive range for
/// typical sentence lengths under mean pooling.
EncoderParams init_params(const Vocabulary& vocab, int d_emb, int d_h,
                          int class_count, std::uint64_t seed);

FeatureVector encode(const EncoderParams& p, const Vocabulary& vocab,
                     const Example& x);
FeatureVector encode_ids(const EncoderParams& p, std::span<const int> ids);

std::pair<int, Eigen::VectorXd> predict(const EncoderParams& p,
                                        const Vocabulary& vocab,
                                        const Example& x);
std::pair<int, Eigen::VectorXd> predict_ids(const EncoderParams& p,
                                            std::span<const int> ids);

double accuracy(const EncoderParams& p, const Vocabulary& vocab,
                const Dataset& d);

struct Gradients {
  Eigen::MatrixXd embedding, w1, w2;
  Eigen::VectorXd b1, b2;
};

/// Mean cross-entropy over the batch.
double batch_loss(const EncoderParams& p, const Vocabulary& vocab,
                  std::span<const Example> batch);

/// Batch loss plus analytic gradients of it w.r.t. every parameter block.
double batch_loss_and_gradients(const EncoderParams& p, const Vocabulary& vocab,
                                std::span<const Example> batch, Gradients& g);

/// Minibatch gradient descent from the given initialization. Deterministic
/// under cfg.seed. With freeze_embeddings the embedding table of `init` is
/// carried through bit-identically.
EncoderParams train(const Dataset& data, const Vocabulary& vocab,
                    const TrainConfig& cfg, const EncoderParams& init,
                    const Dataset* dev = nullptr, TrainLog* log = nullptr);

/// Convenience: initializes internally (seed derived from cfg.seed).
EncoderParams train(const Dataset& data, const Vocabulary& vocab, int d_emb,
                    int d_h, const TrainConfig& cfg,
                    const Dataset* dev = nullptr, TrainLog* log = nullptr);

/// Little-endian binary checkpoint: header (magic, version, dims, vocab
/// hash), then row-major 64-bit float matrices.
void save_checkpoint(const EncoderParams& p, const std::filesystem::path& path);

/// Refuses to load when the stored vocabulary hash differs from expected.
EncoderParams load_checkpoint(const std::filesystem::path& path,
                              std::uint64_t expected_vocab_hash);

}  // namespace clpoison
