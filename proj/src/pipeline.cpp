#include "clpoison/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "clpoison/error.hpp"
#include "clpoison/rng.hpp"

namespace clpoison {

namespace {

constexpr std::uint64_t kTargetSampleStream = 0x7a47;
constexpr std::uint64_t kPoisonTrainStream = 0x90d3;
constexpr std::uint64_t kBadnetStream = 0xbad0;
constexpr std::uint64_t kTriggerStream = 0x7716;

nlohmann::json reference_metadata() {
  // Reported results for BERT-scale victims on public datasets; kept as
  // context in every report, not reproducible with this desk-scale stack.
  return nlohmann::json{
      {"note",
       "reported results for BERT-scale victims on public benchmarks; "
       "context only, not reproducible at this scale"},
      {"bert_base_sst2_cacc", 89.7},
      {"bert_base_sst2_asr", 98.0},
      {"onion_defended_asr_badnet", 40.30},
      {"onion_defended_asr_clean_label", 98.00},
      {"near_full_asr_poison_count_sst2", 40},
      {"poison_fraction_percent", {0.7, 0.4, 0.3}},
  };
}

}  // namespace

std::string defense_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kOnion: return "onion";
    case DefenseKind::kBackTranslation: return "back-translation";
    case DefenseKind::kScpd: return "scpd";
  }
  return "none";
}

DefenseKind parse_defense(const std::string& name) {
  if (name == "none") return DefenseKind::kNone;
  if (name == "onion") return DefenseKind::kOnion;
  if (name == "back-translation") return DefenseKind::kBackTranslation;
  if (name == "scpd") return DefenseKind::kScpd;
  throw ConfigError("unknown defense: " + name);
}

double compute_asr(const std::vector<TrialResult>& trials) {
  if (trials.empty()) return 0.0;
  std::size_t succ = 0;
  for (const auto& t : trials) succ += t.success ? 1 : 0;
  return static_cast<double>(succ) / static_cast<double>(trials.size());
}

double compute_mean_cacc(const std::vector<TrialResult>& trials) {
  if (trials.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : trials) sum += t.poisoned_cacc;
  return sum / static_cast<double>(trials.size());
}

nlohmann::json AttackReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["attack"] = attack;
  j["config"] = config;
  j["config_hash"] = config_hash;
  j["target_class"] = target_class;
  j["benign_cacc"] = benign_cacc;
  j["asr"] = asr;
  j["mean_cacc"] = mean_cacc;
  j["poison_fraction"] = poison_fraction;
  nlohmann::json d;
  d["name"] = defense_name(defense);
  if (defense != DefenseKind::kNone) {
    d["available"] = defense_available;
    if (defense_available) {
      d["threshold"] = defense_threshold;
      d["calibration_rate"] = defense_rate;
    } else {
      d["status"] = "unavailable";
    }
  }
  j["defense"] = d;
  if (defended_asr) j["defended_asr"] = *defended_asr;
  if (defended_mean_cacc) j["defended_mean_cacc"] = *defended_mean_cacc;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trials) {
    nlohmann::json tj;
    tj["target_index"] = t.target_index;
    tj["success"] = t.success;
    tj["poison_count"] = t.poison_count;
    tj["poisoned_cacc"] = t.poisoned_cacc;
    tj["benign_prediction"] = t.benign_prediction;
    tj["poisoned_prediction"] = t.poisoned_prediction;
    tj["benign_mispredicted"] = t.benign_mispredicted;
    if (!t.failure_reason.empty()) tj["failure_reason"] = t.failure_reason;
    if (t.defended_success) tj["defended_success"] = *t.defended_success;
    if (t.defended_prediction) tj["defended_prediction"] = *t.defended_prediction;
    if (t.defended_cacc) tj["defended_cacc"] = *t.defended_cacc;
    tj["closest_candidate_distance"] = t.closest_candidate_distance;
    tj["best_base_fitness"] = t.best_base_fitness;
    tj["best_fitness"] = t.best_fitness;
    arr.push_back(std::move(tj));
  }
  j["trials"] = std::move(arr);
  if (!warnings.empty()) j["warnings"] = warnings;
  j["reference"] = reference_metadata();
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

EncoderParams poison_train(const Dataset& clean,
                           const std::vector<PoisonedExample>& poison,
                           const EncoderParams& base, const Vocabulary& vocab,
                           TrainConfig cfg, std::vector<std::string>* warnings) {
  if (!cfg.freeze_embeddings)
    throw Error("poison_train: freeze_embeddings must be set");
  if (poison.empty() && warnings)
    warnings->push_back("poison_train: empty poison list; the result is a "
                        "near-benign retrain");
  Dataset combined = clean;
  for (const auto& p : poison) combined.examples.push_back(p.to_example());
  return train(combined, vocab, cfg, base);
}

std::vector<int> eligible_targets(const CampaignInputs& in, int y_b) {
  std::vector<int> out;
  for (std::size_t i = 0; i < in.test.examples.size(); ++i) {
    const Example& e = in.test.examples[i];
    if (e.label == y_b) continue;
    if (predict(in.benign, in.vocab, e).first != e.label) continue;
    out.push_back(static_cast<int>(i));
  }
  return out;
}

TrialResult run_trial(const CampaignInputs& in, int target_test_index, int y_b,
                      const PipelineConfig& cfg, std::uint64_t trial_seed,
                      const Dataset* filtered_test,
                      std::optional<double> defense_threshold) {
  TrialResult r;
  r.target_index = target_test_index;
  const Example& target_example =
      in.test.examples.at(static_cast<std::size_t>(target_test_index));
  TargetInstance target{target_example, y_b};
  target.validate();

  const int benign_pred = predict(in.benign, in.vocab, target_example).first;
  if (benign_pred == y_b)
    throw Error("run_trial: target already classified as the target class");
  r.benign_prediction = benign_pred;
  r.benign_mispredicted = benign_pred != target_example.label;

  const AttackContext ctx{in.benign, in.vocab, in.lm};
  const std::vector<CandidateRef> candidates = select_candidates(
      in.benign, in.vocab, in.train, target, cfg.genetic.candidate_pool);
  r.closest_candidate_distance = candidates.front().distance;

  std::vector<PoisonedExample> pool;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Example& base =
        in.train.examples[static_cast<std::size_t>(candidates[k].train_index)];
    GeneticConfig gcfg = cfg.genetic;
    gcfg.seed = Rng::mix(trial_seed, k);
    GeneticResult res = genetic_search(ctx, in.vectors, target, base,
                                       candidates[k].train_index, gcfg);
    if (res.status == SearchStatus::kSuccess) pool.push_back(*res.poison);
  }
  if (pool.empty()) {
    r.failure_reason = "poison generation failed for every candidate";
    r.poisoned_prediction = benign_pred;
    r.poisoned_cacc = accuracy(in.benign, in.vocab, in.test);
    return r;
  }

  const std::vector<PoisonedExample> chosen = final_selection(
      std::move(pool), static_cast<std::size_t>(std::max(0, cfg.poison_size)));
  r.poison_count = static_cast<int>(chosen.size());
  if (!chosen.empty()) {
    r.best_base_fitness = chosen.front().base_fitness;
    r.best_fitness = chosen.front().fitness;
  }

  TrainConfig pt = cfg.poison_train;
  pt.seed = Rng::mix(trial_seed, kPoisonTrainStream);
  const EncoderParams poisoned =
      poison_train(in.train, chosen, in.benign, in.vocab, pt);

  r.poisoned_prediction = predict(poisoned, in.vocab, target_example).first;
  r.success = r.poisoned_prediction == y_b;
  r.poisoned_cacc = accuracy(poisoned, in.vocab, in.test);

  if (defense_threshold) {
    const Example filtered =
        onion_filter(in.lm, target_example, *defense_threshold);
    r.defended_prediction = predict(poisoned, in.vocab, filtered).first;
    r.defended_success = *r.defended_prediction == y_b;
    r.defended_cacc = accuracy(poisoned, in.vocab,
                               filtered_test ? *filtered_test : in.test);
  }
  return r;
}

namespace {

std::vector<int> sample_targets(const CampaignInputs& in, int y_b, int trials,
                                std::uint64_t seed) {
  std::vector<int> eligible = eligible_targets(in, y_b);
  if (static_cast<int>(eligible.size()) < trials)
    throw Error("campaign: insufficient eligible targets; maximum is " +
                std::to_string(eligible.size()));
  Rng rng(Rng::mix(seed, kTargetSampleStream));
  for (std::size_t i = eligible.size(); i > 1; --i)
    std::swap(eligible[i - 1], eligible[rng.next_index(i)]);
  eligible.resize(static_cast<std::size_t>(trials));
  return eligible;
}

Dataset filter_dataset(const NGramModel& lm, const Dataset& d, double threshold) {
  Dataset out;
  out.class_count = d.class_count;
  out.class_names = d.class_names;
  out.examples.reserve(d.examples.size());
  for (const auto& e : d.examples)
    out.examples.push_back(onion_filter(lm, e, threshold));
  return out;
}

struct ResolvedDefense {
  bool active = false;      // defended metrics will be computed
  bool available = true;    // named defense exists in this stack
  double threshold = 0.0;
  double rate = 0.0;
};

ResolvedDefense resolve_defense(const CampaignInputs& in,
                                const DefenseConfig& defense) {
  ResolvedDefense r;
  switch (defense.kind) {
    case DefenseKind::kNone:
      return r;
    case DefenseKind::kOnion:
      r.active = true;
      r.rate = defense.onion_rate;
      r.threshold = defense.threshold
                        ? *defense.threshold
                        : calibrate_threshold(in.lm, in.dev, defense.onion_rate);
      return r;
    case DefenseKind::kBackTranslation:
    case DefenseKind::kScpd:
      r.available = false;  // requires external paraphrase models
      return r;
  }
  return r;
}

template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> workers;
  const int thread_count = std::min(jobs, n);
  workers.reserve(static_cast<std::size_t>(thread_count));
  for (int w = 0; w < thread_count; ++w) {
    workers.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void finalize_report(AttackReport& rep, const CampaignInputs& in,
                     const ResolvedDefense& rd) {
  rep.asr = compute_asr(rep.trials);
  rep.mean_cacc = compute_mean_cacc(rep.trials);
  if (rd.active) {
    std::size_t succ = 0;
    double cacc = 0.0;
    for (const auto& t : rep.trials) {
      succ += (t.defended_success && *t.defended_success) ? 1 : 0;
      cacc += t.defended_cacc ? *t.defended_cacc : 0.0;
    }
    rep.defended_asr =
        static_cast<double>(succ) / static_cast<double>(rep.trials.size());
    rep.defended_mean_cacc = cacc / static_cast<double>(rep.trials.size());
  }
  double poisons = 0.0;
  for (const auto& t : rep.trials) poisons += t.poison_count;
  rep.poison_fraction = poisons / static_cast<double>(rep.trials.size()) /
                        static_cast<double>(in.train.examples.size());
}

}  // namespace

AttackReport run_campaign(const CampaignInputs& in, int y_b,
                          const PipelineConfig& cfg,
                          const DefenseConfig& defense,
                          const std::map<std::string, std::string>& config_snapshot,
                          const std::string& config_hash) {
  if (cfg.trials < 1) throw Error("run_campaign: trials must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  AttackReport rep;
  rep.attack = "clean-label";
  rep.config = config_snapshot;
  rep.config_hash = config_hash;
  rep.target_class = y_b;
  rep.defense = defense.kind;

  const ResolvedDefense rd = resolve_defense(in, defense);
  rep.defense_available = rd.available;
  rep.defense_threshold = rd.threshold;
  rep.defense_rate = rd.rate;
  if (!rd.available)
    rep.warnings.push_back(defense_name(defense.kind) +
                           " defense is unavailable in this stack; "
                           "undefended metrics only");

  Dataset filtered_test;
  if (rd.active) filtered_test = filter_dataset(in.lm, in.test, rd.threshold);

  rep.benign_cacc = accuracy(in.benign, in.vocab, in.test);
  const std::vector<int> targets =
      sample_targets(in, y_b, cfg.trials, cfg.seed);

  rep.trials.resize(targets.size());
  parallel_for(static_cast<int>(targets.size()), cfg.jobs, [&](int i) {
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
    rep.trials[static_cast<std::size_t>(i)] = run_trial(
        in, targets[static_cast<std::size_t>(i)], y_b, cfg, trial_seed,
        rd.active ? &filtered_test : nullptr,
        rd.active ? std::optional<double>(rd.threshold) : std::nullopt);
  });

  finalize_report(rep, in, rd);
  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

AttackReport run_badnet_campaign(const CampaignInputs& in, int y_b,
                                 const std::vector<Token>& trigger, double rate,
                                 const PipelineConfig& cfg,
                                 const DefenseConfig& defense,
                                 const std::map<std::string, std::string>& config_snapshot,
                                 const std::string& config_hash) {
  if (cfg.trials < 1) throw Error("run_badnet_campaign: trials must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  AttackReport rep;
  rep.attack = "badnet";
  rep.config = config_snapshot;
  rep.config_hash = config_hash;
  rep.target_class = y_b;
  rep.defense = defense.kind;

  const ResolvedDefense rd = resolve_defense(in, defense);
  rep.defense_available = rd.available;
  rep.defense_threshold = rd.threshold;
  rep.defense_rate = rd.rate;
  if (!rd.available)
    rep.warnings.push_back(defense_name(defense.kind) +
                           " defense is unavailable in this stack; "
                           "undefended metrics only");

  const Dataset poisoned_data = badnet_poison(
      in.train, trigger, rate, y_b, Rng::mix(cfg.seed, kBadnetStream));
  const auto poison_count = static_cast<int>(std::ceil(
      rate * static_cast<double>(in.train.examples.size())));

  // The rare-word baseline trains the whole victim on the dirty-label data;
  // its trigger lives in the embedding, so nothing is frozen here.
  TrainConfig pt = cfg.poison_train;
  pt.freeze_embeddings = false;
  pt.seed = Rng::mix(cfg.seed, kPoisonTrainStream);
  const EncoderParams model = train(poisoned_data, in.vocab, pt, in.benign);

  rep.benign_cacc = accuracy(in.benign, in.vocab, in.test);
  const double cacc = accuracy(model, in.vocab, in.test);
  double defended_cacc = 0.0;
  Dataset filtered_test;
  if (rd.active) {
    filtered_test = filter_dataset(in.lm, in.test, rd.threshold);
    defended_cacc = accuracy(model, in.vocab, filtered_test);
  }

  const std::vector<int> targets =
      sample_targets(in, y_b, cfg.trials, cfg.seed);
  rep.trials.resize(targets.size());
  parallel_for(static_cast<int>(targets.size()), cfg.jobs, [&](int i) {
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
    const int idx = targets[static_cast<std::size_t>(i)];
    const Example& target = in.test.examples[static_cast<std::size_t>(idx)];
    Rng rng(Rng::mix(trial_seed, kTriggerStream));
    const Example triggered = insert_trigger(target, trigger, rng);

    TrialResult r;
    r.target_index = idx;
    r.benign_prediction = predict(in.benign, in.vocab, target).first;
    r.poison_count = poison_count;
    r.poisoned_prediction = predict(model, in.vocab, triggered).first;
    r.success = r.poisoned_prediction == y_b;
    r.poisoned_cacc = cacc;
    if (rd.active) {
      const Example filtered = onion_filter(in.lm, triggered, rd.threshold);
      r.defended_prediction = predict(model, in.vocab, filtered).first;
      r.defended_success = *r.defended_prediction == y_b;
      r.defended_cacc = defended_cacc;
    }
    rep.trials[static_cast<std::size_t>(i)] = r;
  });

  finalize_report(rep, in, rd);
  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

std::vector<SweepRow> sweep_poison_count(const CampaignInputs& in, int y_b,
                                         const std::vector<int>& counts,
                                         const PipelineConfig& cfg,
                                         std::vector<std::string>* warnings) {
  if (counts.empty()) throw Error("sweep: empty count list");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) throw Error("sweep: counts must be positive");
    if (i > 0 && counts[i] <= counts[i - 1])
      throw Error("sweep: counts must be strictly ascending");
  }
  const int max_count = counts.back();
  const std::vector<int> targets = sample_targets(in, y_b, cfg.trials, cfg.seed);
  const AttackContext ctx{in.benign, in.vocab, in.lm};

  struct PerTrial {
    std::vector<char> success;  // per count
    std::vector<double> cacc;
  };
  std::vector<PerTrial> results(targets.size());
  std::atomic<bool> clipped{false};

  parallel_for(static_cast<int>(targets.size()), cfg.jobs, [&](int i) {
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
    const int idx = targets[static_cast<std::size_t>(i)];
    TargetInstance target{in.test.examples[static_cast<std::size_t>(idx)], y_b};

    const std::vector<CandidateRef> candidates = select_candidates(
        in.benign, in.vocab, in.train, target,
        std::max(cfg.genetic.candidate_pool, max_count));
    std::vector<PoisonedExample> pool;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const Example& base =
          in.train.examples[static_cast<std::size_t>(candidates[k].train_index)];
      GeneticConfig gcfg = cfg.genetic;
      gcfg.seed = Rng::mix(trial_seed, k);
      GeneticResult res = genetic_search(ctx, in.vectors, target, base,
                                         candidates[k].train_index, gcfg);
      if (res.status == SearchStatus::kSuccess) pool.push_back(*res.poison);
    }
    const std::vector<PoisonedExample> ranked =
        final_selection(std::move(pool), static_cast<std::size_t>(max_count));

    PerTrial& out = results[static_cast<std::size_t>(i)];
    for (int c : counts) {
      const auto use = static_cast<std::size_t>(
          std::min<int>(c, static_cast<int>(ranked.size())));
      if (use < static_cast<std::size_t>(c)) clipped = true;
      std::vector<PoisonedExample> chosen(ranked.begin(),
                                          ranked.begin() + static_cast<long>(use));
      // Same retrain seed as run_trial: count columns differ only in data.
      TrainConfig pt = cfg.poison_train;
      pt.seed = Rng::mix(trial_seed, kPoisonTrainStream);
      const EncoderParams model =
          poison_train(in.train, chosen, in.benign, in.vocab, pt);
      out.success.push_back(
          predict(model, in.vocab, target.example).first == y_b ? 1 : 0);
      out.cacc.push_back(accuracy(model, in.vocab, in.test));
    }
  });

  if (clipped && warnings)
    warnings->push_back("sweep: some counts exceeded the available poison "
                        "pool and were clipped");

  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    SweepRow row;
    row.count = counts[c];
    double succ = 0.0, cacc = 0.0;
    for (const auto& r : results) {
      succ += r.success[c];
      cacc += r.cacc[c];
    }
    row.asr = succ / static_cast<double>(results.size());
    row.mean_cacc = cacc / static_cast<double>(results.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<ProjectedPoint> project_features(
    const EncoderParams& p, const Vocabulary& vocab,
    const std::vector<std::pair<std::string, const Dataset*>>& groups,
    std::vector<std::string>* warnings) {
  std::vector<std::string> labels;
  std::vector<FeatureVector> feats;
  for (const auto& [name, data] : groups) {
    for (const auto& e : data->examples) {
      labels.push_back(name);
      feats.push_back(encode(p, vocab, e));
    }
  }
  if (feats.size() < 3)
    throw Error("project_features: need at least 3 examples");

  const long n = static_cast<long>(feats.size());
  const long d = feats.front().size();
  Eigen::MatrixXd x(n, d);
  for (long i = 0; i < n; ++i) x.row(i) = feats[static_cast<std::size_t>(i)];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  std::vector<ProjectedPoint> out(static_cast<std::size_t>(n));
  const Eigen::MatrixXd cov =
      (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const auto& evals = eig.eigenvalues();  // ascending
  if (evals[d - 1] <= 1e-12) {
    if (warnings)
      warnings->push_back("project_features: features are rank-deficient "
                          "(all identical); emitting zeros");
    for (std::size_t i = 0; i < out.size(); ++i) out[i].group = labels[i];
    return out;
  }

  Eigen::MatrixXd basis(d, 2);
  basis.col(0) = eig.eigenvectors().col(d - 1);
  basis.col(1) = eig.eigenvectors().col(d - 2);
  for (int c = 0; c < 2; ++c) {  // sign convention: largest loading positive
    long argmax = 0;
    basis.col(c).cwiseAbs().maxCoeff(&argmax);
    if (basis(argmax, c) < 0) basis.col(c) = -basis.col(c);
  }
  const Eigen::MatrixXd proj = x * basis;
  for (long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)].x = proj(i, 0);
    out[static_cast<std::size_t>(i)].y = proj(i, 1);
    out[static_cast<std::size_t>(i)].group = labels[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace clpoison
