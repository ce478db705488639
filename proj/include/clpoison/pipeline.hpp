#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clpoison/attack.hpp"
#include "clpoison/corpus.hpp"
#include "clpoison/defense.hpp"
#include "clpoison/ngram.hpp"
#include "clpoison/synonyms.hpp"
#include "clpoison/victim.hpp"
#include "json.hpp"

namespace clpoison {

/// Read-only data and models shared by every trial of a campaign.
struct CampaignInputs {
  const Dataset& train;
  const Dataset& dev;
  const Dataset& test;
  const Vocabulary& vocab;
  const EncoderParams& benign;
  const NGramModel& lm;
  const WordVectors& vectors;
};

struct PipelineConfig {
  GeneticConfig genetic;
  TrainConfig poison_train;  // freeze_embeddings must be true
  int poison_size = 10;      // P, poisons injected per trial
  int trials = 25;
  int jobs = 1;
  std::uint64_t seed = 0;
};

enum class DefenseKind { kNone, kOnion, kBackTranslation, kScpd };

std::string defense_name(DefenseKind k);
DefenseKind parse_defense(const std::string& name);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  double onion_rate = 0.05;  // calibration false-removal rate
  std::optional<double> threshold;  // explicit override; else calibrated
};

struct TrialResult {
  int target_index = -1;  // into the test set
  bool success = false;
  int poison_count = 0;
  double poisoned_cacc = 0.0;
  int benign_prediction = -1;
  int poisoned_prediction = -1;
  bool benign_mispredicted = false;
  std::string failure_reason;  // empty unless poison generation failed

  std::optional<bool> defended_success;
  std::optional<int> defended_prediction;
  std::optional<double> defended_cacc;

  // provenance behind the per-example distance columns
  double closest_candidate_distance = 0.0;
  double best_base_fitness = 0.0;  // before perturbation
  double best_fitness = 0.0;       // after perturbation
};

struct AttackReport {
  std::string attack;  // "clean-label" or "badnet"
  std::map<std::string, std::string> config;
  std::string config_hash;
  int target_class = 0;
  double benign_cacc = 0.0;
  std::vector<TrialResult> trials;
  double asr = 0.0;
  double mean_cacc = 0.0;
  std::optional<double> defended_asr;
  std::optional<double> defended_mean_cacc;
  DefenseKind defense = DefenseKind::kNone;
  bool defense_available = true;
  double defense_threshold = 0.0;
  double defense_rate = 0.0;
  double poison_fraction = 0.0;  // mean poison count / |train|
  std::vector<std::string> warnings;
  double wall_clock_seconds = 0.0;

  nlohmann::json to_json() const;
};

double compute_asr(const std::vector<TrialResult>& trials);
double compute_mean_cacc(const std::vector<TrialResult>& trials);

/// Head retraining on clean + poison with the embedding table frozen,
/// starting from the clean-trained parameters.
EncoderParams poison_train(const Dataset& clean,
                           const std::vector<PoisonedExample>& poison,
                           const EncoderParams& base, const Vocabulary& vocab,
                           TrainConfig cfg,
                           std::vector<std::string>* warnings = nullptr);

/// One full attack trial: candidate selection, genetic search per candidate,
/// final selection, poison training, evaluation. `filtered_test` and
/// `defense_threshold` enable the defended evaluation.
TrialResult run_trial(const CampaignInputs& in, int target_test_index, int y_b,
                      const PipelineConfig& cfg, std::uint64_t trial_seed,
                      const Dataset* filtered_test = nullptr,
                      std::optional<double> defense_threshold = std::nullopt);

/// Test indices eligible as targets: correctly classified by the benign
/// model and not of the target class.
std::vector<int> eligible_targets(const CampaignInputs& in, int y_b);

AttackReport run_campaign(const CampaignInputs& in, int y_b,
                          const PipelineConfig& cfg,
                          const DefenseConfig& defense,
                          const std::map<std::string, std::string>& config_snapshot,
                          const std::string& config_hash);

/// Rare-word baseline: one dirty-label poisoned training set, one retrained
/// model, trigger inserted into each trial target at test time.
AttackReport run_badnet_campaign(const CampaignInputs& in, int y_b,
                                 const std::vector<Token>& trigger, double rate,
                                 const PipelineConfig& cfg,
                                 const DefenseConfig& defense,
                                 const std::map<std::string, std::string>& config_snapshot,
                                 const std::string& config_hash);

struct SweepRow {
  int count = 0;
  double asr = 0.0;
  double mean_cacc = 0.0;
};

/// Shares one generated poison pool per trial across all counts; count c
/// injects the c best poisons (prefix property).
std::vector<SweepRow> sweep_poison_count(const CampaignInputs& in, int y_b,
                                         const std::vector<int>& counts,
                                         const PipelineConfig& cfg,
                                         std::vector<std::string>* warnings = nullptr);

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  std::string group;
};

/// PCA of pooled encoder features down to two components.
std::vector<ProjectedPoint> project_features(
    const EncoderParams& p, const Vocabulary& vocab,
    const std::vector<std::pair<std::string, const Dataset*>>& groups,
    std::vector<std::string>* warnings = nullptr);

}  // namespace clpoison
