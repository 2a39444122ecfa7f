#pragma once

#include "bvae/dataset.hpp"
#include "bvae/evaluation.hpp"
#include "bvae/latentviz.hpp"
#include "bvae/model.hpp"
#include "bvae/scoring.hpp"
#include "bvae/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace bvae {

/// Ordered key=value pairs read from a flat text file.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;
};

/// Blank lines and '#' comments are skipped; whitespace around keys and
/// values is trimmed. Duplicate keys and lines without '=' are errors.
KeyValues parse_key_values(std::istream& is, const std::string& source = "config");

/// Every setting an experiment needs. The master seed drives everything:
/// run r trains with seed + r.
struct ExperimentConfig {
  ModelSpec model;
  TrainingConfig training;
  ScoringConfig scoring;
  SynthConfig synth;
  std::uint64_t synth_seed = 7;
  TsneConfig tsne;
  int grid_pairs = 8;
  /// Periodic checkpoint interval in epochs; 0 keeps only the best and final ones.
  int checkpoint_every = 10;

  /// Dataset root laid out as train/val/test, or "synthetic" for the
  /// in-memory fixture built from the synth_* keys.
  std::string dataset = "synthetic";
  std::uint64_t seed = 0;
  int runs = 1;
  std::vector<double> sweep_betas = kDefaultBetas;

  /// Throws ConfigError naming the offending key.
  void validate() const;

  /// Every key with its current value, one per line, in a fixed order.
  /// Parsing the dump reproduces this configuration.
  std::string resolved() const;

  /// The training settings of run r (seed + r).
  TrainingConfig training_for_run(int run) const;
};

/// Applies the pairs on top of the defaults. Unknown keys are rejected.
ExperimentConfig parse_experiment(const KeyValues& kv);

ExperimentConfig load_experiment(const std::filesystem::path& file);

/// Sets one key; throws ConfigError for an unknown key or malformed value.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Known keys in dump order.
std::vector<std::string> config_keys();

/// Loads the configured dataset (directory or synthetic fixture).
DatasetSplit load_dataset(const ExperimentConfig& cfg);

/// Parses the canonical text of a ModelSpec / TrainingConfig (as produced by
/// canonical() and TrainingConfig::canonical()).
ModelSpec parse_model_spec(const std::string& canonical_text);
TrainingConfig parse_training_config(const std::string& canonical_text);

std::string format_real(double v);

}  // namespace bvae
