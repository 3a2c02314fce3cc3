// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "data/dataset.hpp"

namespace mvsync {

// Static backdrop estimate for one (example, view): per-pixel, per-channel
// temporal median, plus the foreground threshold used against it.
struct BackgroundModel {
  Image median;
  double tau = 0.08;
};

enum class BackgroundMode { keep, remove, substitute, mixed };

BackgroundMode parse_background_mode(const std::string& name);
const char* background_mode_name(BackgroundMode mode);

struct BackgroundPolicy {
  BackgroundMode mode = BackgroundMode::keep;
  double mixed_ratio = 0.5;   // probability that a mixed pair gets removal
  bool any_example = false;   // substitution source: any example's view
};

// Temporal median of >= 3 same-shape frames, computed in double.
BackgroundModel compute_median_background(const std::vector<Image>& frames,
                                          double tau = 0.08);

// Foreground = any channel differs from the median by more than tau.
// Returned row-major, 1 byte per pixel, 1 = foreground.
std::vector<uint8_t> foreground_mask(const Image& frame,
                                     const BackgroundModel& bg);

// Zero background pixels, keep foreground. Idempotent.
Image remove_background(const Image& frame, const BackgroundModel& bg);

// Zero foreground pixels, keep background (the probe image for shortcut
// experiments).
Image remove_foreground(const Image& frame, const BackgroundModel& bg);

// Foreground over another view's median.
Image substitute_background(const Image& frame, const BackgroundModel& own,
                            const BackgroundModel& other);

struct PairFrames {
  Image a;
  Image b;
  BackgroundMode applied = BackgroundMode::keep;  // mixed resolves to one
};

// Lazily computes and memoizes one median model per (example, view).
// Models are always estimated from the dataset's frames; cached PNGs are a
// write-only export so estimation never depends on prior runs.
class BackgroundStore {
 public:
  explicit BackgroundStore(DatasetPtr ds, double tau = 0.08,
                           int max_median_frames = 201);

  const BackgroundModel& model(size_t example, int view) const;

  // Apply one policy decision to both full frames of a pair.
  PairFrames apply_policy(const FrameIndex& a, const FrameIndex& b,
                          const BackgroundPolicy& policy, Rng& rng) const;

  // Write bg_view_<v>.png per example under the dataset directory layout.
  void write_cache(const std::string& root) const;

  const MultiViewDataset& dataset() const { return *ds_; }
  double tau() const { return tau_; }

 private:
  const BackgroundModel& substitution_source(const FrameIndex& ix,
                                             bool any_example, Rng& rng) const;

  DatasetPtr ds_;
  double tau_;
  int max_frames_;
  mutable std::map<std::pair<size_t, int>, BackgroundModel> models_;
};

}  // namespace mvsync
