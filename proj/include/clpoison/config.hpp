#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "clpoison/attack.hpp"
#include "clpoison/deskgen.hpp"
#include "clpoison/pipeline.hpp"
#include "clpoison/synonyms.hpp"
#include "clpoison/victim.hpp"

namespace clpoison {

/// Flat `key = value` experiment configuration. Unknown keys are rejected;
/// module invariants are re-validated after every load/override.
struct RunConfig {
  std::string data_train, data_dev, data_test;
  std::uint64_t seed = 0;

  int victim_embedding_dim = 64;
  int victim_hidden_dim = 128;
  double victim_learning_rate = 0.05;
  int victim_batch_size = 32;
  int victim_epochs = 30;
  double victim_l2 = 0.0;
  int victim_min_count = 1;

  double poison_learning_rate = 0.05;
  int poison_epochs = 20;
  int poison_batch_size = 32;

  int lm_order = 3;
  double lm_k = 0.1;

  int vectors_dim = 50;
  int vectors_window = 5;
  int vectors_min_count = 2;
  int vectors_power_iterations = 3;
  int vectors_oversample = 10;

  int synonyms_k = 60;
  double synonyms_max_cos_dist = 0.4;

  int genetic_population = 20;
  int genetic_iterations = 15;
  int genetic_candidate_pool = 50;
  double genetic_delta = 0.85;
  double genetic_rho = 1.2;
  double genetic_max_sub_fraction = 0.25;
  double genetic_temperature = 1.0;

  std::string attack_target_class;
  int attack_poison_size = 10;
  int campaign_trials = 25;

  std::string badnet_trigger = "bb";
  double badnet_rate = 0.01;

  double defense_onion_rate = 0.05;

  int jobs = 1;

  /// Parse a config file; throws ConfigError on unknown keys or bad values.
  static RunConfig from_file(const std::filesystem::path& path);
  /// Apply one `key=value` override (CLI flags win over the file).
  void apply_override(const std::string& key, const std::string& value);
  /// Re-validate every embedded module invariant.
  void validate() const;

  /// Canonical key -> value map of the resolved configuration. Excludes
  /// `jobs`: worker count is execution infrastructure, not experiment
  /// identity, and reports must be identical across job counts.
  std::map<std::string, std::string> resolved() const;
  /// FNV-1a hex digest of the resolved map.
  std::string hash() const;

  TrainConfig victim_train_config() const;
  TrainConfig poison_train_config() const;
  GeneticConfig genetic_config() const;
  VectorTrainConfig vector_train_config() const;
  PipelineConfig pipeline_config() const;
};

}  // namespace clpoison
