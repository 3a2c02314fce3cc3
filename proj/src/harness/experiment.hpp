// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "data/dataset.hpp"
#include "synth/generate.hpp"
#include "train/trainer.hpp"

namespace mvsync {

using Json = nlohmann::json;

// Overlay onto base, recursively for objects. Every overlay key must exist
// in base with a compatible type, so typos and schema drift fail loudly.
// Arrays and scalars replace wholesale.
Json merge_config(const Json& base, const Json& overlay,
                  const std::string& where = "");

// One experiment, fully resolved against the defaults. The tree is the
// single source of truth; the accessors below materialize the library
// config structs from it.
class ExperimentConfig {
 public:
  ExperimentConfig();  // pure defaults
  static Json defaults();
  static ExperimentConfig from_json(const Json& overlay);
  static ExperimentConfig from_file(const std::string& path);

  // Dotted-path override ("ssl.steps=500"); the value is parsed as JSON,
  // falling back to a plain string.
  void set(const std::string& dotted_key, const std::string& value);

  const Json& tree() const { return tree_; }

  // Identity of the whole experiment, excluding only the output location.
  uint64_t experiment_identity() const;
  // Identity of the pretrained weights: everything that shapes the SSL
  // weight trajectory (dataset, sampler, background, model, schedule, seed).
  uint64_t ssl_identity() const;
  // Identity of a fine-tuned model: the transfer trajectory plus where the
  // encoder came from ("random" or a checkpoint tag).
  uint64_t transfer_identity(const std::string& init_tag) const;

  SceneConfig scene() const;
  SamplerConfig sampler() const;
  BackgroundPolicy policy() const;
  double tau() const;
  EncoderConfig encoder() const;
  SSLTrainConfig ssl_config() const;
  PoseTrainConfig pose_config() const;

  uint64_t seed() const;
  std::string out_dir() const;
  void set_out_dir(const std::string& dir);
  void set_seed(uint64_t seed);

 private:
  explicit ExperimentConfig(Json tree) : tree_(std::move(tree)) {}
  Json tree_;
};

// The generated reference: every key with its default and meaning.
std::string config_reference();

// Dataset plumbing shared by the commands. Synthetic sources generate in
// memory; disk sources load the directory tree.
DatasetPtr open_dataset(const ExperimentConfig& cfg);
// Subjects in first-appearance order.
std::vector<std::string> dataset_subjects(const MultiViewDataset& ds);
// First dataset.train_subjects subjects; the rest are the held-out split.
DatasetPtr train_split(const ExperimentConfig& cfg, DatasetPtr ds);
DatasetPtr test_split(const ExperimentConfig& cfg, DatasetPtr ds);
// The train subjects used for fine-tuning: all of them or just the first.
DatasetPtr transfer_split(const ExperimentConfig& cfg, DatasetPtr ds);

}  // namespace mvsync
