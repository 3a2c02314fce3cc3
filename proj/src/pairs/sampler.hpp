// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "bg/background.hpp"
#include "core/rng.hpp"
#include "data/dataset.hpp"

namespace mvsync {

enum class PairClass { synchronized, unsynchronized, flipped };
enum class FlippedSide { none, a, b };

// Per-side crop jitter for the single-view control mode. Offsets are
// fractions of the box size; scale multiplies it; angle is radians.
struct AugmentParams {
  double dx = 0.0;
  double dy = 0.0;
  double scale = 1.0;
  double angle = 0.0;
};

struct PairSample {
  FrameIndex a;
  FrameIndex b;
  PairClass pair_class = PairClass::synchronized;
  FlippedSide flipped_side = FlippedSide::none;
  bool sync_loss_defined = true;  // false iff pair_class == flipped
  bool pre_flipped = false;       // both sides mirrored, decided pre-flip
  AugmentParams aug_a;
  AugmentParams aug_b;
};

struct PairTriplet {
  PairSample pos;
  PairSample neg;
  PairSample flip;
};

struct SamplerConfig {
  int d_min = 4;
  int d_max = 128;
  double pre_flip_probability = 0.5;
  // Single-view control: pairs share one view and differ by augmentations.
  bool single_view = false;
  double aug_shift = 0.1;
  double aug_scale_lo = 0.85;
  double aug_scale_hi = 1.18;
  double aug_rotate = 0.25;

  void validate() const;
};

// Draws the three pair classes from one dataset. Holds its own RNG, so a
// given (dataset, config, seed) yields one deterministic pair stream.
class PairSampler {
 public:
  PairSampler(DatasetPtr ds, const SamplerConfig& cfg, uint64_t seed);

  PairSample sample_synchronized();
  PairSample sample_unsynchronized();
  PairSample sample_flipped();

  // Mirrors both frames with the configured probability; the decision is
  // made before (and independently of) flip-pair construction.
  PairSample pre_flip_augment(PairSample pair);

  // One pair of each class per batch element.
  std::vector<PairTriplet> build_batch(int batch_size);

  const MultiViewDataset& dataset() const { return *ds_; }
  Rng& rng() { return rng_; }

 private:
  size_t pick_example();
  void pick_views(size_t example, int& va, int& vb);
  int pick_time(size_t example);
  AugmentParams pick_augment();
  PairSample synchronized_base();

  DatasetPtr ds_;
  SamplerConfig cfg_;
  Rng rng_;
  // Per example and admissible offset, every start time whose partner
  // start+offset exists; drives exact-uniform |dt| draws on gappy time sets.
  struct OffsetTable {
    std::vector<int> offsets;                 // admissible |dt|
    std::vector<std::vector<int>> starts;     // aligned with offsets
  };
  std::vector<OffsetTable> offsets_;
  std::vector<size_t> unsync_examples_;  // examples with any admissible offset
};

// Pixels for one pair: background policy on the full frames, then the crop,
// then the recorded mirrors. out_size is the square crop resolution. With
// background_only the subject is erased after the policy, leaving only
// backdrop appearance — the shortcut-probe input.
std::pair<Image, Image> materialize_pair(const BackgroundStore& store,
                                         const PairSample& pair,
                                         const BackgroundPolicy& policy,
                                         int out_size, Rng& rng,
                                         bool background_only = false);

}  // namespace mvsync
