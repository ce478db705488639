#include "clpoison/deskgen.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "clpoison/error.hpp"
#include "clpoison/rng.hpp"

namespace clpoison {

namespace {

struct Concept {
  bool polar = false;
  int pref = -1;         // preferred class for polar concepts
  double strength = 0.5; // p(preferred class) weight factor
  std::vector<Token> surfaces;
  std::vector<double> jitter;  // per-surface class tilt
  double weight = 1.0;
  int signature = 0;
};

struct World {
  std::vector<Concept> concepts;
  std::vector<std::vector<std::size_t>> companions;
  std::vector<Token> signatures;
  int polar_count = 0;
};

World build_world(const DeskDataConfig& cfg, Rng& rng) {
  World w;
  w.polar_count = cfg.polar_concepts;
  for (int i = 0; i < cfg.polar_concepts; ++i) {
    Concept c;
    c.polar = true;
    c.pref = i % 2;
    c.strength = cfg.strength_min +
                 (cfg.strength_max - cfg.strength_min) * rng.next_double();
    const int fam = 2 + static_cast<int>(rng.next_index(4));  // 2..5
    for (int j = 0; j < fam; ++j) {
      c.surfaces.push_back("p" + std::to_string(i) + "w" + std::to_string(j));
      c.jitter.push_back(rng.next_gaussian());
    }
    c.weight = std::pow(static_cast<double>(i / 2 + 1), -0.3);
    w.concepts.push_back(std::move(c));
  }
  for (int i = 0; i < cfg.filler_concepts; ++i) {
    Concept c;
    const int fam = 1 + static_cast<int>(rng.next_index(5));  // 1..5
    for (int j = 0; j < fam; ++j) {
      c.surfaces.push_back("f" + std::to_string(i) + "w" + std::to_string(j));
      c.jitter.push_back(0.7 * rng.next_gaussian());
    }
    c.weight = std::pow(static_cast<double>(i + 1), -0.3);
    w.concepts.push_back(std::move(c));
  }

  for (int i = 0; i < cfg.signature_words; ++i)
    w.signatures.push_back("s" + std::to_string(i));
  const std::size_t total = w.concepts.size();
  for (auto& c : w.concepts)
    c.signature = static_cast<int>(rng.next_index(w.signatures.size()));

  w.companions.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    while (w.companions[i].size() < 4) {
      const std::size_t j = rng.next_index(total);
      if (j == i) continue;
      bool dup = false;
      for (std::size_t k : w.companions[i]) dup |= (k == j);
      if (!dup) w.companions[i].push_back(j);
    }
  }
  return w;
}

double class_weight(const Concept& c, int cls) {
  if (!c.polar) return c.weight;
  return c.weight * (c.pref == cls ? c.strength : 1.0 - c.strength);
}

class Sampler {
 public:
  Sampler(const World& w, const DeskDataConfig& cfg) : w_(w), cfg_(cfg) {
    for (int cls = 0; cls < 2; ++cls) {
      auto& pw = polar_weights_[cls];
      for (int i = 0; i < w.polar_count; ++i)
        pw.push_back(class_weight(w.concepts[static_cast<std::size_t>(i)], cls));
    }
    for (std::size_t i = static_cast<std::size_t>(w.polar_count);
         i < w.concepts.size(); ++i)
      filler_weights_.push_back(w.concepts[i].weight);
  }

  std::vector<Token> sentence(int cls, Rng& rng) const {
    const int span = cfg_.max_length - cfg_.min_length + 1;
    const int len =
        cfg_.min_length + static_cast<int>(rng.next_index(
                              static_cast<std::size_t>(span)));
    std::vector<Token> toks;
    std::size_t cur = 0;
    bool have_cur = false;
    while (static_cast<int>(toks.size()) < len) {
      cur = step(cur, have_cur, cls, rng);
      have_cur = true;
      const Concept& c = w_.concepts[cur];
      if (rng.next_double() < cfg_.signature_probability)
        toks.push_back(w_.signatures[static_cast<std::size_t>(c.signature)]);
      toks.push_back(surface(c, cls, rng));
    }
    if (static_cast<int>(toks.size()) > len + 2)
      toks.resize(static_cast<std::size_t>(len + 2));
    return toks;
  }

 private:
  std::size_t step(std::size_t cur, bool have_cur, int cls, Rng& rng) const {
    if (have_cur && rng.next_double() < cfg_.hop_probability) {
      const auto& comp = w_.companions[cur];
      std::vector<double> wts;
      wts.reserve(comp.size());
      for (std::size_t i : comp) wts.push_back(class_weight(w_.concepts[i], cls));
      return comp[rng.next_discrete(wts)];
    }
    if (rng.next_double() < cfg_.polar_fraction)
      return rng.next_discrete(polar_weights_[cls]);
    return static_cast<std::size_t>(w_.polar_count) +
           rng.next_discrete(filler_weights_);
  }

  Token surface(const Concept& c, int cls, Rng& rng) const {
    const double sign = cls == 1 ? 1.0 : -1.0;
    std::vector<double> wts(c.surfaces.size());
    double max_logit = -1e300;
    for (std::size_t i = 0; i < wts.size(); ++i)
      max_logit = std::max(max_logit, cfg_.surface_tilt * sign * c.jitter[i]);
    for (std::size_t i = 0; i < wts.size(); ++i)
      wts[i] = std::exp(cfg_.surface_tilt * sign * c.jitter[i] - max_logit);
    return c.surfaces[rng.next_discrete(wts)];
  }

  const World& w_;
  const DeskDataConfig& cfg_;
  std::vector<double> polar_weights_[2];
  std::vector<double> filler_weights_;
};

Dataset make_split(const Sampler& sampler, int n, Rng& rng) {
  Dataset d;
  d.class_count = 2;
  d.class_names = {"negative", "positive"};
  for (int i = 0; i < n; ++i) {
    const int cls = static_cast<int>(rng.next_index(2));
    d.examples.push_back({sampler.sentence(cls, rng), cls});
  }
  return d;
}

}  // namespace

DeskData generate_desk_data(const DeskDataConfig& cfg) {
  if (cfg.train_size < 1 || cfg.dev_size < 1 || cfg.test_size < 1)
    throw Error("generate_desk_data: split sizes must be positive");
  if (cfg.min_length < 2 || cfg.max_length < cfg.min_length)
    throw Error("generate_desk_data: bad sentence length range");

  Rng world_rng(Rng::mix(cfg.seed, 0xd35c));
  const World world = build_world(cfg, world_rng);
  const Sampler sampler(world, cfg);

  Rng data_rng(Rng::mix(cfg.seed, 0xda7a));
  DeskData out;
  out.train = make_split(sampler, cfg.train_size, data_rng);
  out.dev = make_split(sampler, cfg.dev_size, data_rng);
  out.test = make_split(sampler, cfg.test_size, data_rng);

  // Plant a rare token in a few spread-out training sentences so rare-word
  // triggers are in-vocabulary with a trained (then frozen) embedding.
  if (cfg.planted_rare_count > 0 && !cfg.planted_rare_token.empty()) {
    const auto n = out.train.examples.size();
    const auto gap = std::max<std::size_t>(
        1, n / static_cast<std::size_t>(cfg.planted_rare_count));
    for (int i = 0; i < cfg.planted_rare_count; ++i) {
      const std::size_t idx = (static_cast<std::size_t>(i) * gap + gap / 2) % n;
      auto& toks = out.train.examples[idx].tokens;
      toks.insert(toks.begin() + static_cast<long>(toks.size() / 2),
                  cfg.planted_rare_token);
    }
  }
  return out;
}

}  // namespace clpoison
