// Copyright 2026 The LIxP Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lixp/contextualizer.hpp"
#include "lixp/encoder.hpp"
#include "lixp/eval.hpp"
#include "lixp/synthetic.hpp"
#include "lixp/trainer.hpp"

namespace lixp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Flat `key = value` lines; `#` starts a comment; blank lines are skipped.
/// Throws ConfigError on a line without '=', an empty key, or a repeated key.
std::vector<ConfigEntry> parse_key_values(std::string_view text);

/// Everything needed to generate data, build the model and train.
struct ExperimentConfig {
  SyntheticTaskSpec task;
  std::size_t support_per_class = 16;
  std::size_t test_per_class = 16;
  std::vector<std::size_t> image_hidden_dims{64};
  std::vector<std::size_t> text_hidden_dims{64};
  std::size_t embed_dim = 32;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::uint64_t encoder_seed = 0;
  LixpConfig lixp;
  TrainConfig train;
  std::string checkpoint_path = "model.ckpt";
  std::string log_path = "train_log.csv";

  [[nodiscard]] DualEncoder make_model() const;
};

/// Unknown keys and malformed values throw ConfigError naming the line.
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::string& path);
/// Every key with its current value; parses back to an equal configuration.
std::string to_config_text(const ExperimentConfig& cfg);

/// Generated pairs with the class-stratified split of `cfg`.
struct ExperimentData {
  PairedData pairs;
  DataSplit split;
  Array2 train_images;
  Array2 train_texts;
};
ExperimentData make_experiment_data(const ExperimentConfig& cfg);

/// Episode settings read from a key=value file; pools are file paths.
struct EpisodeFileSpec {
  std::string support_path;
  std::string test_path;
  std::string texts_path;
  std::vector<std::size_t> shots{1};
  std::size_t num_episodes = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<ClassifierConfig> classifiers;
  std::string csv_path;
  std::string json_path;
};

EpisodeFileSpec parse_episode_config(std::string_view text);
EpisodeFileSpec load_episode_config(const std::string& path);

}  // namespace lixp
