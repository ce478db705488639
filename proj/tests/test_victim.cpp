#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "clpoison/error.hpp"
#include "clpoison/rng.hpp"
#include "clpoison/victim.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace clpoison;
using namespace clpoison::testing;

namespace {

Vocabulary two_token_vocab() {
  return build_vocab(make_dataset({{"aa bb", 0}}), 1);
}

EncoderParams toy_params() {
  // vocab: <unk>=0 <mask>=1 aa=2 bb=3; d_emb=2, d_h=2, C=2
  Vocabulary v = two_token_vocab();
  EncoderParams p;
  p.embedding.setZero(4, 2);
  p.embedding.row(2) << 0.1, 0.2;   // aa
  p.embedding.row(3) << 0.3, -0.1;  // bb
  p.embedding.row(1) << -0.2, 0.4;  // mask
  p.w1.resize(2, 2);
  p.w1 << 0.5, -0.2, 0.1, 0.4;
  p.b1.resize(2);
  p.b1 << 0.05, -0.03;
  p.w2.resize(2, 2);
  p.w2 << 0.7, -0.3, 0.2, 0.6;
  p.b2.resize(2);
  p.b2 << 0.01, -0.02;
  p.vocab_hash = v.hash();
  return p;
}

}  // namespace

TEST_CASE("all-zero embedding table gives bias-only preactivation") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  p.embedding.setZero();
  const FeatureVector h1 = encode(p, v, make_example("aa bb aa"));
  const FeatureVector h2 = encode(p, v, make_example("bb"));
  CHECK((h1 - p.b1.array().tanh().matrix()).norm() == doctest::Approx(0.0));
  CHECK((h1 - h2).norm() == doctest::Approx(0.0));
}

TEST_CASE("mean pooling makes duplicated sentences encode identically") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  const FeatureVector a = encode(p, v, make_example("aa"));
  const FeatureVector aa = encode(p, v, make_example("aa aa"));
  CHECK((a - aa).norm() == doctest::Approx(0.0));
}

TEST_CASE("encode matches independent scalar arithmetic") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  // sentence "aa bb": mean embedding then affine then tanh, all by hand
  const double x0 = (0.1 + 0.3) / 2.0, x1 = (0.2 + -0.1) / 2.0;
  const double pre0 = x0 * 0.5 + x1 * 0.1 + 0.05;
  const double pre1 = x0 * -0.2 + x1 * 0.4 + -0.03;
  const FeatureVector h = encode(p, v, make_example("aa bb"));
  CHECK(h[0] == doctest::Approx(std::tanh(pre0)).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(std::tanh(pre1)).epsilon(1e-12));
}

TEST_CASE("encode rejects empty sentences") {
  Vocabulary v = two_token_vocab();
  CHECK_THROWS_AS(encode(toy_params(), v, Example{}), Error);
}

TEST_CASE("predict: zero output weights give uniform probabilities, class 0") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  p.w2.setZero();
  p.b2.setZero();
  auto [cls, probs] = predict(p, v, make_example("aa bb"));
  CHECK(cls == 0);
  CHECK(probs[0] == doctest::Approx(0.5));
  CHECK(probs[1] == doctest::Approx(0.5));
}

TEST_CASE("predict probabilities match a brute-force oracle and normalize") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  auto [cls, probs] = predict(p, v, make_example("aa bb"));
  // independent computation
  const double x0 = 0.2, x1 = 0.05;
  const double h0 = std::tanh(x0 * 0.5 + x1 * 0.1 + 0.05);
  const double h1 = std::tanh(x0 * -0.2 + x1 * 0.4 - 0.03);
  const double z0 = h0 * 0.7 + h1 * 0.2 + 0.01;
  const double z1 = h0 * -0.3 + h1 * 0.6 - 0.02;
  const double e0 = std::exp(z0), e1 = std::exp(z1);
  CHECK(probs[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
  CHECK(cls == (z0 >= z1 ? 0 : 1));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Vocabulary vv = two_token_vocab();
    EncoderParams rp = init_params(vv, 8, 6, 3, seed);
    Dataset dd = make_dataset({{"aa bb aa", 0}}, {"a", "b", "c"});
    auto [c2, pr] = predict(rp, vv, dd.examples[0]);
    CHECK(pr.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pr.minCoeff() > 0.0);
    CHECK(c2 >= 0);
  }
}

TEST_CASE("training fits a linearly separable toy set") {
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({"red warm bright sun", 0});
    rows.push_back({"blue cold dark moon", 1});
  }
  Dataset d = make_dataset(rows);
  Vocabulary v = build_vocab(d, 1);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 0.1;
  cfg.seed = 3;
  EncoderParams p = train(d, v, 16, 8, cfg);
  CHECK(accuracy(p, v, d) == doctest::Approx(1.0));
}

TEST_CASE("epochs=0 returns the initialization unchanged") {
  Dataset d = make_dataset({{"aa bb", 0}, {"bb aa", 1}});
  Vocabulary v = build_vocab(d, 1);
  EncoderParams init = init_params(v, 4, 4, 2, 11);
  TrainConfig cfg;
  cfg.epochs = 0;
  EncoderParams out = train(d, v, cfg, init);
  CHECK(out.embedding == init.embedding);
  CHECK(out.w1 == init.w1);
  CHECK(out.w2 == init.w2);
}

TEST_CASE("freeze_embeddings keeps the embedding table bitwise equal") {
  Dataset d = make_dataset({{"aa bb aa", 0}, {"bb bb aa", 1}});
  Vocabulary v = build_vocab(d, 1);
  EncoderParams init = init_params(v, 4, 4, 2, 5);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.freeze_embeddings = true;
  EncoderParams out = train(d, v, cfg, init);
  CHECK(out.embedding == init.embedding);
  CHECK(out.w1 != init.w1);
}

TEST_CASE("deterministic training under a fixed seed") {
  Dataset d = make_dataset({{"aa bb aa", 0}, {"bb bb aa", 1}, {"aa aa", 0}});
  Vocabulary v = build_vocab(d, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 42;
  EncoderParams a = train(d, v, 4, 4, cfg);
  EncoderParams b = train(d, v, 4, 4, cfg);
  CHECK(a.embedding == b.embedding);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  Dataset d = make_dataset({{"aa bb", 0}});
  Vocabulary v = build_vocab(d, 1);
  EncoderParams init = init_params(v, 4, 4, 2, 1);
  init.w2(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_WITH_AS(train(d, v, cfg, init),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("analytic gradients match central finite differences") {
  // relative error < 1e-4 with step 1e-5 on unit-scale params
  const double step = 1e-5;
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d = make_dataset({{"aa bb aa", trial % 2}, {"bb", (trial + 1) % 2}});
    Vocabulary v = build_vocab(d, 1);
    EncoderParams p = init_params(v, 3, 4, 2, 1000 + static_cast<std::uint64_t>(trial));
    // unit-scale params
    auto unit = [&rng](Eigen::MatrixXd& m) {
      for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) m(i, j) = 2.0 * rng.next_double() - 1.0;
    };
    unit(p.embedding);
    unit(p.w1);
    unit(p.w2);
    for (long i = 0; i < p.b1.size(); ++i) p.b1[i] = 2.0 * rng.next_double() - 1.0;
    for (long i = 0; i < p.b2.size(); ++i) p.b2[i] = 2.0 * rng.next_double() - 1.0;

    Gradients g;
    batch_loss_and_gradients(p, v, d.examples, g);

    auto check_entry = [&](double& entry, double analytic) {
      const double keep = entry;
      entry = keep + step;
      const double up = batch_loss(p, v, d.examples);
      entry = keep - step;
      const double dn = batch_loss(p, v, d.examples);
      entry = keep;
      const double fd = (up - dn) / (2.0 * step);
      const double rel =
          std::abs(analytic - fd) / std::max(1.0, std::abs(analytic) + std::abs(fd));
      CHECK(rel < 1e-4);
      ++checked;
    };
    auto check_block = [&](Eigen::MatrixXd& block, const Eigen::MatrixXd& grad) {
      for (long i = 0; i < block.rows(); ++i)
        for (long j = 0; j < block.cols(); ++j) check_entry(block(i, j), grad(i, j));
    };
    check_block(p.embedding, g.embedding);
    check_block(p.w1, g.w1);
    check_block(p.w2, g.w2);
    for (long i = 0; i < p.b1.size(); ++i) check_entry(p.b1[i], g.b1[i]);
    for (long i = 0; i < p.b2.size(); ++i) check_entry(p.b2[i], g.b2[i]);
  }
  CHECK(checked > 100);
}

TEST_CASE("accuracy counts argmax matches") {
  Vocabulary v = two_token_vocab();
  EncoderParams p = toy_params();
  p.w2.setZero();
  p.b2 << 1.0, 0.0;  // always predicts class 0
  Dataset all0 = make_dataset({{"aa", 0}, {"bb", 0}});
  CHECK(accuracy(p, v, all0) == doctest::Approx(1.0));
  Dataset mixed = make_dataset({{"aa", 0}, {"bb", 0}, {"aa bb", 0}, {"bb bb", 1}});
  CHECK(accuracy(p, v, mixed) == doctest::Approx(0.75));
}

TEST_CASE("checkpoint round-trip is bitwise exact") {
  auto dir = temp_dir("victim");
  Vocabulary v = two_token_vocab();
  EncoderParams p = init_params(v, 5, 7, 3, 77);
  save_checkpoint(p, dir / "m.ckpt");
  EncoderParams q = load_checkpoint(dir / "m.ckpt", v.hash());
  CHECK(q.embedding == p.embedding);
  CHECK(q.w1 == p.w1);
  CHECK(q.b1 == p.b1);
  CHECK(q.w2 == p.w2);
  CHECK(q.b2 == p.b2);
  CHECK(q.vocab_hash == p.vocab_hash);
}

TEST_CASE("checkpoint refuses a different vocabulary") {
  auto dir = temp_dir("victim");
  Vocabulary v = two_token_vocab();
  EncoderParams p = init_params(v, 4, 4, 2, 1);
  save_checkpoint(p, dir / "m2.ckpt");
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "m2.ckpt", v.hash() + 1),
                       doctest::Contains("hash"), Error);
}

TEST_CASE("truncated checkpoint loads nothing") {
  auto dir = temp_dir("victim");
  Vocabulary v = two_token_vocab();
  EncoderParams p = init_params(v, 4, 4, 2, 1);
  save_checkpoint(p, dir / "m3.ckpt");
  const auto full = std::filesystem::file_size(dir / "m3.ckpt");
  std::filesystem::resize_file(dir / "m3.ckpt", full - 9);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "m3.ckpt", v.hash()),
                       doctest::Contains("truncated"), Error);
}
