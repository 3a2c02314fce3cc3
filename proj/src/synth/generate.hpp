// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "data/dataset.hpp"
#include "synth/skeleton.hpp"

namespace mvsync {

// Everything that determines a generated dataset. Two equal configs yield
// bit-identical datasets.
struct SceneConfig {
  uint64_t seed = 1;
  int n_subjects = 2;
  int n_actions = 1;
  int n_views = 4;
  int n_frames = 200;
  int image_size = 96;
  double smoothness = 1.0;
  // One texture seed per view; filled from `seed` when left empty.
  std::vector<uint64_t> view_background_seeds;
  bool symmetric_backgrounds = false;

  void validate() const;
  uint64_t hash() const;
};

// Procedurally generated multi-view capture. Frames are rasterized on first
// access and kept as 8-bit planes, so repeated reads are cheap and every
// read of one index is bit-identical.
class SynthDataset : public MultiViewDataset {
 public:
  explicit SynthDataset(const SceneConfig& config);

  using MultiViewDataset::bbox;
  using MultiViewDataset::full_frame;
  using MultiViewDataset::pose;

  const std::vector<ExampleInfo>& examples() const override { return examples_; }
  Image full_frame(size_t example, int view, int time) const override;
  BBox bbox(size_t example, int view, int time) const override;
  bool has_poses() const override { return true; }
  Pose3D pose(size_t example, int view, int time) const override;
  bool has_cameras() const override { return true; }
  CameraModel camera(size_t example, int view) const override;
  bool has_background() const override { return true; }
  Image background(size_t example, int view) const override;
  uint64_t content_hash() const override { return config_.hash(); }

  const SceneConfig& config() const { return config_; }

  // Ground truth beyond the dataset interface, for calibration and checks.
  const Pose3D& world_pose(size_t example, int time) const;
  std::vector<float> coverage_mask(size_t example, int view, int time) const;

 private:
  const Pose3D& world_pose_checked(size_t example, int view, int time) const;
  Image render_frame(size_t example, int view, int time,
                     std::vector<float>* coverage) const;
  size_t flat_frame(size_t example, int view, int time) const;

  SceneConfig config_;
  std::vector<ExampleInfo> examples_;
  std::vector<std::vector<Pose3D>> world_poses_;     // [example][time-1]
  std::vector<CameraModel> cameras_;                 // [view-1], shared rig
  std::vector<Eigen::Vector3d> body_colors_;         // [subject]
  std::vector<Image> backgrounds_;                   // [example*n_views + view-1]
  mutable std::vector<std::vector<uint8_t>> frame_cache_;
};

std::shared_ptr<const SynthDataset> generate_dataset(const SceneConfig& config);

}  // namespace mvsync
