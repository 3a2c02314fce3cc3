// SPDX-License-Identifier: Apache-2.0
#include "synth/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "core/rng.hpp"
#include "core/strutil.hpp"
#include "synth/render.hpp"

namespace mvsync {

namespace {

constexpr double kRigRadius = 3818.0;  // mm from scene center
constexpr double kRigHeight = 1600.0;
constexpr double kTargetHeight = 900.0;

uint64_t subject_seed(uint64_t seed, int subject) {
  return mix64(seed + 0x9e3779b97f4a7c15ULL * (subject + 1));
}

}  // namespace

void SceneConfig::validate() const {
  if (n_subjects < 1 || n_actions < 1 || n_frames < 1 || image_size < 8)
    throw ConfigError("scene: counts must be positive (image_size >= 8)");
  if (n_views < 2) throw ConfigError("scene: need at least 2 views");
  if (!view_background_seeds.empty() &&
      view_background_seeds.size() != static_cast<size_t>(n_views))
    throw ConfigError("scene: background seed list must match n_views");
  if (!(smoothness > 0.0)) throw ConfigError("scene: smoothness must be > 0");
}

uint64_t SceneConfig::hash() const {
  uint64_t h = fnv1a("scene", 0xcbf29ce484222325ULL);
  h = fnv1a_u64(seed, h);
  for (int v : {n_subjects, n_actions, n_views, n_frames, image_size})
    h = fnv1a_u64(static_cast<uint64_t>(v), h);
  uint64_t sm;
  static_assert(sizeof sm == sizeof smoothness);
  std::memcpy(&sm, &smoothness, 8);
  h = fnv1a_u64(sm, h);
  for (uint64_t s : view_background_seeds) h = fnv1a_u64(s, h);
  h = fnv1a_u64(symmetric_backgrounds ? 1 : 0, h);
  return h;
}

SynthDataset::SynthDataset(const SceneConfig& config) : config_(config) {
  config_.validate();
  if (config_.view_background_seeds.empty())
    for (int v = 1; v <= config_.n_views; ++v)
      config_.view_background_seeds.push_back(
          mix64(config_.seed ^ 0x6267736565640000ULL) + v);

  double f = 1.05 * config_.image_size;
  double c = config_.image_size / 2.0;
  for (int v = 0; v < config_.n_views; ++v) {
    double th = 2.0 * M_PI * v / config_.n_views + M_PI / 4.0;
    Eigen::Vector3d pos(kRigRadius * std::cos(th), kRigHeight,
                        kRigRadius * std::sin(th));
    cameras_.push_back(CameraModel::look_at(
        pos, {0.0, kTargetHeight, 0.0}, {0.0, 1.0, 0.0}, f, c, c));
  }

  std::vector<int> views(config_.n_views);
  for (int v = 0; v < config_.n_views; ++v) views[v] = v + 1;
  std::vector<int> times(config_.n_frames);
  for (int t = 0; t < config_.n_frames; ++t) times[t] = t + 1;

  for (int s = 0; s < config_.n_subjects; ++s) {
    uint64_t sseed = subject_seed(config_.seed, s);
    body_colors_.push_back(subject_color(sseed));
    SkeletonModel skel = SkeletonModel::for_subject(sseed);
    for (int a = 0; a < config_.n_actions; ++a) {
      ExampleInfo ex;
      ex.subject = "S" + format_int(s + 1);
      ex.action = "A" + format_int(a + 1);
      ex.views = views;
      ex.times = times;
      examples_.push_back(std::move(ex));
      world_poses_.push_back(sample_trajectory(
          skel, config_.n_frames, mix64(sseed + 0x61637400ULL + a),
          config_.smoothness));
      size_t e = examples_.size() - 1;
      for (int v = 0; v < config_.n_views; ++v)
        backgrounds_.push_back(render_background(
            config_.image_size,
            mix64(config_.view_background_seeds[v] + 0x9e3779b97f4a7c15ULL * e),
            config_.symmetric_backgrounds));
    }
  }
  frame_cache_.resize(examples_.size() * config_.n_views * config_.n_frames);
}

size_t SynthDataset::flat_frame(size_t example, int view, int time) const {
  return (example * config_.n_views + (view - 1)) * config_.n_frames +
         (time - 1);
}

const Pose3D& SynthDataset::world_pose(size_t example, int time) const {
  if (example >= examples_.size() || time < 1 || time > config_.n_frames)
    throw StructureError("dataset: world pose index out of range");
  return world_poses_[example][time - 1];
}

const Pose3D& SynthDataset::world_pose_checked(size_t example, int view,
                                               int time) const {
  check_index(example, view, time);
  return world_poses_[example][time - 1];
}

Pose3D SynthDataset::pose(size_t example, int view, int time) const {
  const Pose3D& w = world_pose_checked(example, view, time);
  return project_pose(w, cameras_[view - 1]).first;
}

CameraModel SynthDataset::camera(size_t example, int view) const {
  check_view(example, view);
  return cameras_[view - 1];
}

Image SynthDataset::background(size_t example, int view) const {
  check_view(example, view);
  return backgrounds_[example * config_.n_views + (view - 1)];
}

BBox SynthDataset::bbox(size_t example, int view, int time) const {
  const Pose3D& w = world_pose_checked(example, view, time);
  auto [pc, px] = project_pose(w, cameras_[view - 1]);
  BBox b;
  b.cx = px.row(0).mean();
  b.cy = px.row(1).mean();
  double spread = 0.0;
  for (int j = 0; j < px.cols(); ++j)
    spread = std::max({spread, std::abs(px(0, j) - b.cx),
                       std::abs(px(1, j) - b.cy)});
  double pad = cameras_[view - 1].f * 120.0 / pc.row(2).mean();
  b.size = std::max(8.0, 2.0 * (spread + pad));
  return b;
}

Image SynthDataset::render_frame(size_t example, int view, int time,
                                 std::vector<float>* coverage) const {
  const Pose3D& w = world_poses_[example][time - 1];
  auto [pc, px] = project_pose(w, cameras_[view - 1]);
  size_t subject = example / config_.n_actions;
  return render_view(pc, px, cameras_[view - 1],
                     backgrounds_[example * config_.n_views + (view - 1)],
                     body_colors_[subject], coverage);
}

Image SynthDataset::full_frame(size_t example, int view, int time) const {
  check_index(example, view, time);
  auto& slot = frame_cache_[flat_frame(example, view, time)];
  int size = config_.image_size;
  if (slot.empty()) {
    Image img = render_frame(example, view, time, nullptr);
    slot.resize(img.size());
    const float* p = img.data();
    for (size_t i = 0; i < slot.size(); ++i)
      slot[i] = static_cast<uint8_t>(std::lround(p[i] * 255.0f));
    return img;
  }
  Image img(size, size);
  float* p = img.data();
  for (size_t i = 0; i < slot.size(); ++i) p[i] = slot[i] / 255.0f;
  return img;
}

std::vector<float> SynthDataset::coverage_mask(size_t example, int view,
                                               int time) const {
  check_index(example, view, time);
  std::vector<float> cov;
  render_frame(example, view, time, &cov);
  return cov;
}

std::shared_ptr<const SynthDataset> generate_dataset(const SceneConfig& config) {
  return std::make_shared<SynthDataset>(config);
}

}  // namespace mvsync
