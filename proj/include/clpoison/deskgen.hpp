#pragma once

#include <cstdint>

#include "clpoison/corpus.hpp"

namespace clpoison {

/// Synthetic two-class corpus generator for desk-scale experiments.
///
/// Sentences are Markov walks over "concepts"; each concept owns a family of
/// interchangeable surface tokens and a signature function word that often
/// precedes it. Families therefore share contexts (so PMI vectors recover
/// them as substitution candidates) while individual surfaces carry a small
/// class tilt (so substitutions move the victim's features). Polar concepts
/// give the classes their signal; a handful of planted rare tokens provide
/// realistic rare-word trigger material.
struct DeskDataConfig {
  int train_size = 2000;
  int dev_size = 400;
  int test_size = 400;
  std::uint64_t seed = 0;

  int polar_concepts = 260;
  int filler_concepts = 700;
  int signature_words = 160;
  double polar_fraction = 0.55;  // fresh draws that come from polar concepts
  double surface_tilt = 1.0;     // kappa: class tilt of surface choice
  double hop_probability = 0.5;  // continue the companion walk
  double signature_probability = 0.5;
  double strength_min = 0.70;  // polar concept class preference range
  double strength_max = 0.97;
  int min_length = 10;
  int max_length = 22;
  int planted_rare_count = 4;  // occurrences of the planted rare token
  Token planted_rare_token = "bb";
};

struct DeskData {
  Dataset train, dev, test;
};

DeskData generate_desk_data(const DeskDataConfig& cfg);

}  // namespace clpoison
