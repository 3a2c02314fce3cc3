// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "bg/background.hpp"
#include "metrics/metrics.hpp"
#include "nn/checkpoint.hpp"
#include "nn/optim.hpp"
#include "pairs/sampler.hpp"
#include "pose/transfer.hpp"
#include "ssl/model.hpp"

namespace mvsync {

// Copy a planar image into batch slot b. Shapes must already agree.
void pack_image(const Image& img, Act<float>& batch, int b);

struct SSLTrainConfig {
  EncoderConfig encoder;
  FusionMode fusion = FusionMode::mult;
  bool concat_relu = false;
  SignalMask signal = SignalMask::both;
  SamplerConfig sampler;
  BackgroundPolicy policy;
  bool background_only = false;  // train on subject-erased probe images
  double tau = 0.08;
  int crop_size = 64;
  int batch_size = 8;  // triplets per optimizer step
  int64_t total_steps = 10000;
  double lr0 = 1e-4;
  double lr_min = 1e-7;
  double weight_decay = 1e-4;
  uint64_t seed = 1;

  void validate() const;
};

struct StepLog {
  int64_t step = 0;  // 1-based, after the step has been applied
  double lr = 0.0;
  double loss = 0.0;
  double acc_sync = 0.0;
  double acc_flip = 0.0;
};

// Owns the full pretraining loop state: pair stream, background policy
// stream, model, and optimizer. One (dataset, config) pair runs one
// deterministic weight trajectory.
class SSLTrainer {
 public:
  SSLTrainer(DatasetPtr ds, const SSLTrainConfig& cfg);

  StepLog step();

  int64_t steps_done() const { return step_; }
  const SSLTrainConfig& config() const { return cfg_; }
  SSLModel<float>& model() { return model_; }
  const BackgroundStore& store() const { return store_; }

  Checkpoint checkpoint(uint64_t config_hash);
  // check_dataset=false skips the dataset identity check, for evaluating a
  // checkpoint against data it was not trained on.
  void restore(const Checkpoint& ckpt, uint64_t config_hash,
               bool check_dataset = true);

 private:
  DatasetPtr ds_;
  SSLTrainConfig cfg_;
  BackgroundStore store_;
  PairSampler sampler_;
  Rng policy_rng_;
  SSLModel<float> model_;
  AdamW<float> opt_;
  int64_t step_ = 0;
};

// Fraction of correct synchronization calls at threshold 0.5 over fresh
// pairs: n sync pairs should score p_sync > 0.5 and n unsync pairs with
// |dt| in [dt_lo, dt_hi] should score below. When background_only is set,
// the subject is erased from every frame first, so only backdrop appearance
// remains; chance level there means the shortcut is gone.
double sync_accuracy(SSLModel<float>& model, DatasetPtr ds,
                     const BackgroundStore& store,
                     const BackgroundPolicy& policy, int crop_size, int dt_lo,
                     int dt_hi, int n, uint64_t seed,
                     bool background_only = false);

// Fraction of correct flip calls at threshold 0.5 over fresh pairs: n plain
// synchronized pairs should score p_noflip > 0.5 and n single-side-mirrored
// pairs should score below.
double flip_accuracy(SSLModel<float>& model, DatasetPtr ds,
                     const BackgroundStore& store,
                     const BackgroundPolicy& policy, int crop_size, int n,
                     uint64_t seed, bool background_only = false);

// Cross-view retrieval: for n query frames, embed the query view's crop and
// rank every frame of another view by cosine similarity; returns the
// fraction of queries whose true counterpart ranks within top_k.
double retrieval_recall(SSLModel<float>& model, DatasetPtr ds,
                        const BackgroundStore& store, int crop_size, int n,
                        int top_k, uint64_t seed);

struct PoseTrainConfig {
  EncoderConfig encoder;
  // keep feeds raw crops; remove zeroes the backdrop first (training and
  // evaluation must agree). Other modes are rejected here.
  BackgroundMode background = BackgroundMode::keep;
  double tau = 0.08;
  int frozen_blocks = 3;  // stem freezes together with the prefix
  int crop_size = 64;
  int batch_size = 16;
  int64_t total_steps = 2000;
  double lr0 = 1e-4;
  double lr_min = 1e-7;
  double weight_decay = 1e-4;
  double flip_probability = 0.5;
  uint64_t seed = 1;

  void validate() const;
};

// The regression label for one frame: the camera-space pose rotated so the
// optical axis passes through the crop center, with the root subtracted.
Pose3D regression_target(const MultiViewDataset& ds, size_t example, int view,
                         int time);

// Supervised transfer of the encoder to single-image pose regression.
class PoseTrainer {
 public:
  PoseTrainer(DatasetPtr ds, const PoseTrainConfig& cfg);

  // Adopt the encoder weights (and running statistics) of a pretraining
  // checkpoint; freezing is re-applied afterwards.
  void load_encoder(const Checkpoint& ckpt);

  double step();  // returns the batch loss

  int64_t steps_done() const { return step_; }
  const PoseTrainConfig& config() const { return cfg_; }
  PoseModel<float>& model() { return model_; }
  const PoseNormalizer& normalizer() const { return normalizer_; }

  Checkpoint checkpoint(uint64_t config_hash);
  void restore(const Checkpoint& ckpt, uint64_t config_hash,
               bool check_dataset = true);

 private:
  Image input_frame(const FrameIndex& ix) const;

  DatasetPtr ds_;
  PoseTrainConfig cfg_;
  std::vector<FrameIndex> frames_;
  std::unique_ptr<BackgroundStore> store_;  // only when background == remove
  PoseNormalizer normalizer_;
  Rng rng_;
  PoseModel<float> model_;
  AdamW<float> opt_;
  int64_t step_ = 0;
};

// Pose error of the model over every frame of the dataset. When the model
// was trained on backdrop-removed crops, pass remove and a store built on
// this dataset so evaluation sees the same input distribution.
MetricReport evaluate_pose(PoseModel<float>& model,
                           const PoseNormalizer& normalizer, DatasetPtr ds,
                           int crop_size, int batch = 16,
                           BackgroundMode background = BackgroundMode::keep,
                           const BackgroundStore* store = nullptr);

// Store a double vector in a float checkpoint without precision loss: the
// float vector carries the raw bytes, two entries per value, and the join
// reproduces the doubles bit for bit.
std::vector<float> split_doubles(const std::vector<double>& v);
std::vector<double> join_doubles(const std::vector<float>& v);

// Joint-major flattening (j0x, j0y, j0z, j1x, ...), matching the
// normalizer's vector layout.
std::vector<double> flatten_pose(const Pose3D& p);
Pose3D unflatten_pose(const std::vector<double>& v);

}  // namespace mvsync
