#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>

#include "clpoison/corpus.hpp"
#include "clpoison/error.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace clpoison;
using namespace clpoison::testing;

TEST_CASE("load_tsv maps lines to examples") {
  auto dir = temp_dir("corpus");
  write_file(dir / "a.tsv", "bad movie\t0\ngreat movie !\t1\n");
  Dataset d = load_tsv(dir / "a.tsv");
  REQUIRE(d.examples.size() == 2);
  CHECK(d.examples[1].tokens == std::vector<Token>{"great", "movie", "!"});
  CHECK(d.examples[1].label == 1);
  CHECK(d.class_names == std::vector<std::string>{"0", "1"});
}

TEST_CASE("load_tsv lowercases and uses first-seen label order") {
  auto dir = temp_dir("corpus");
  write_file(dir / "b.tsv", "Fine Film\tpos\nAwful\tneg\nLovely\tpos\n");
  Dataset d = load_tsv(dir / "b.tsv");
  CHECK(d.class_count == 2);
  CHECK(d.class_names == std::vector<std::string>{"pos", "neg"});
  CHECK(d.examples[0].tokens == std::vector<Token>{"fine", "film"});
  CHECK(d.examples[0].label == 0);
  CHECK(d.examples[1].label == 1);
  CHECK(d.examples[2].label == 0);
}

TEST_CASE("load_tsv parse errors carry line numbers") {
  auto dir = temp_dir("corpus");
  write_file(dir / "c.tsv", "good\tpos\nno tab here\n");
  CHECK_THROWS_WITH_AS(load_tsv(dir / "c.tsv"),
                       doctest::Contains(":2"), Error);
  write_file(dir / "d.tsv", "\tpos\n");
  CHECK_THROWS_WITH_AS(load_tsv(dir / "d.tsv"),
                       doctest::Contains("empty text"), Error);
  write_file(dir / "e.tsv", "text\t\n");
  CHECK_THROWS_AS(load_tsv(dir / "e.tsv"), Error);
}

TEST_CASE("load_tsv with fixed class names rejects unknown labels") {
  auto dir = temp_dir("corpus");
  write_file(dir / "f.tsv", "good\tpos\n");
  Dataset d = load_tsv(dir / "f.tsv", {"neg", "pos"});
  CHECK(d.examples[0].label == 1);
  write_file(dir / "g.tsv", "good\tother\n");
  CHECK_THROWS_AS(load_tsv(dir / "g.tsv", {"neg", "pos"}), Error);
}

TEST_CASE("tsv round-trip is token identical") {
  auto dir = temp_dir("corpus");
  Dataset d = make_dataset({{"a quick brown fox", 0},
                            {"lazy dog !", 1},
                            {"one token", 0}},
                           {"neg", "pos"});
  save_tsv(d, dir / "rt.tsv");
  Dataset back = load_tsv(dir / "rt.tsv");
  REQUIRE(back.examples.size() == d.examples.size());
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    CHECK(back.examples[i].tokens == d.examples[i].tokens);
    CHECK(back.class_names[static_cast<std::size_t>(back.examples[i].label)] ==
          d.class_names[static_cast<std::size_t>(d.examples[i].label)]);
  }
}

TEST_CASE("build_vocab frequency ordering and min_count") {
  Dataset d = make_dataset({{"a a b", 0}});
  Vocabulary v1 = build_vocab(d, 1);
  CHECK(v1.size() == 4);  // UNK, MASK, a, b
  CHECK(v1.lookup("a") == 2);
  CHECK(v1.lookup("b") == 3);
  CHECK(v1.count(2) == 2);

  Vocabulary v2 = build_vocab(d, 2);
  CHECK(v2.size() == 3);
  CHECK(v2.lookup("a") == 2);
  CHECK(v2.lookup("b") == Vocabulary::kUnkId);
}

TEST_CASE("build_vocab ties break lexicographically") {
  Dataset d = make_dataset({{"b a", 0}});
  Vocabulary v = build_vocab(d, 1);
  CHECK(v.lookup("a") == 2);
  CHECK(v.lookup("b") == 3);
}

TEST_CASE("build_vocab errors") {
  Dataset empty;
  CHECK_THROWS_AS(build_vocab(empty, 1), Error);
  Dataset d = make_dataset({{"a", 0}});
  CHECK_THROWS_AS(build_vocab(d, 0), Error);
}

TEST_CASE("vocabulary ids are a bijection on retained tokens") {
  Dataset d = make_dataset({{"c a b a c c d", 0}, {"b e f g a", 1}});
  Vocabulary v = build_vocab(d, 1);
  std::set<int> ids;
  for (const auto& tok : {"a", "b", "c", "d", "e", "f", "g"}) {
    const int id = v.lookup(tok);
    CHECK(id >= 2);
    CHECK(v.token(id) == tok);
    ids.insert(id);
  }
  CHECK(ids.size() == 7);
  CHECK(v.lookup("never-seen") == Vocabulary::kUnkId);
}

TEST_CASE("sentinel surfaces in the corpus never claim ids") {
  Dataset d = make_dataset({{"<unk> <mask> a", 0}});
  Vocabulary v = build_vocab(d, 1);
  CHECK(v.size() == 3);  // sentinels + a
  CHECK(v.lookup("<unk>") == Vocabulary::kUnkId);
  CHECK(v.lookup("<mask>") == Vocabulary::kMaskId);
}

TEST_CASE("vocab dump format") {
  auto dir = temp_dir("corpus");
  Dataset d = make_dataset({{"a a b", 0}});
  Vocabulary v = build_vocab(d, 1);
  save_vocab(v, dir / "v.tsv");
  std::ifstream in(dir / "v.tsv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "<unk>\t0\t0");
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line == "a\t2\t2");
}

namespace {
std::multiset<std::string> as_multiset(const Dataset& d) {
  std::multiset<std::string> out;
  for (const auto& e : d.examples) {
    std::string key = std::to_string(e.label);
    for (const auto& t : e.tokens) key += " " + t;
    out.insert(key);
  }
  return out;
}
}  // namespace

TEST_CASE("split sizes, determinism, and partition property") {
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({"tok" + std::to_string(i), i % 2});
  Dataset d = make_dataset(rows);

  SplitResult s = split(d, 0.8, 0.1, 0.1, 7);
  CHECK(s.train.examples.size() == 8);
  CHECK(s.dev.examples.size() == 1);
  CHECK(s.test.examples.size() == 1);

  SplitResult s2 = split(d, 0.8, 0.1, 0.1, 7);
  CHECK(as_multiset(s.train) == as_multiset(s2.train));
  CHECK(as_multiset(s.dev) == as_multiset(s2.dev));
  CHECK(as_multiset(s.test) == as_multiset(s2.test));

  // union of the parts is the input multiset
  auto all = as_multiset(s.train);
  for (const auto& k : as_multiset(s.dev)) all.insert(k);
  for (const auto& k : as_multiset(s.test)) all.insert(k);
  CHECK(all == as_multiset(d));
}

TEST_CASE("split seed changes the permutation but not the sizes") {
  std::vector<std::pair<std::string, int>> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({"w" + std::to_string(i), 0});
  Dataset d = make_dataset(rows);
  SplitResult a = split(d, 0.5, 0.25, 0.25, 1);
  SplitResult b = split(d, 0.5, 0.25, 0.25, 2);
  CHECK(a.train.examples.size() == b.train.examples.size());
  CHECK(a.test.examples.size() == b.test.examples.size());
  CHECK(as_multiset(a.test) != as_multiset(b.test));
}

TEST_CASE("split rejects bad fractions") {
  Dataset d = make_dataset({{"a", 0}, {"b", 1}});
  CHECK_THROWS_AS(split(d, 1.0, 0.0, 0.0, 1), Error);
  CHECK_THROWS_AS(split(d, 0.5, 0.4, 0.3, 1), Error);
}

TEST_CASE("mean token length") {
  Dataset d = make_dataset({{"a b c", 0}, {"a", 1}});
  CHECK(d.mean_token_length() == doctest::Approx(2.0));
}
