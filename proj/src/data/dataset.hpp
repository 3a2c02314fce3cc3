// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/camera.hpp"
#include "core/error.hpp"
#include "core/image.hpp"
#include "core/pose.hpp"

namespace mvsync {

// Addresses one frame. Views and times are 1-based ids, not positions.
struct FrameIndex {
  size_t example = 0;
  int view = 0;
  int time = 0;
};

struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double size = 0.0;
};

// One example = one (subject, action) capture. All views share `times`.
struct ExampleInfo {
  std::string subject;
  std::string action;
  std::vector<int> views;
  std::vector<int> times;
};

// Synchronized multi-view video with annotations. Immutable after
// construction; accessors are total over the declared index grid and safe
// for concurrent readers.
class MultiViewDataset {
 public:
  virtual ~MultiViewDataset() = default;

  virtual const std::vector<ExampleInfo>& examples() const = 0;

  virtual Image full_frame(size_t example, int view, int time) const = 0;
  virtual BBox bbox(size_t example, int view, int time) const = 0;

  virtual bool has_poses() const = 0;
  // Joint positions in the view's camera coordinates, millimeters.
  virtual Pose3D pose(size_t example, int view, int time) const = 0;

  virtual bool has_cameras() const = 0;
  virtual CameraModel camera(size_t example, int view) const = 0;

  // Static per-view backdrop when the source provides one (generator truth
  // or a cached median estimate); not every dataset has it.
  virtual bool has_background() const { return false; }
  virtual Image background(size_t example, int view) const;

  // Identity of the index grid and annotations (not pixel data); used to
  // detect checkpoint/dataset mismatches.
  virtual uint64_t content_hash() const = 0;

  Image full_frame(const FrameIndex& ix) const {
    return full_frame(ix.example, ix.view, ix.time);
  }
  Pose3D pose(const FrameIndex& ix) const {
    return pose(ix.example, ix.view, ix.time);
  }
  BBox bbox(const FrameIndex& ix) const {
    return bbox(ix.example, ix.view, ix.time);
  }

  size_t total_frames() const;

 protected:
  // Throws a structural error naming the offending index component.
  void check_index(size_t example, int view, int time) const;
  void check_view(size_t example, int view) const;
};

using DatasetPtr = std::shared_ptr<const MultiViewDataset>;

// Re-indexed window onto a base dataset: a subset of examples, each with a
// subset of its times. Views are untouched. Frames are forwarded lazily.
class SubsetView : public MultiViewDataset {
 public:
  // kept_examples lists positions into base->examples(); kept_times[i] is
  // the retained (still sorted) time list for kept_examples[i].
  SubsetView(DatasetPtr base, std::vector<size_t> kept_examples,
             std::vector<std::vector<int>> kept_times);

  using MultiViewDataset::bbox;
  using MultiViewDataset::full_frame;
  using MultiViewDataset::pose;

  const std::vector<ExampleInfo>& examples() const override { return examples_; }
  Image full_frame(size_t example, int view, int time) const override;
  BBox bbox(size_t example, int view, int time) const override;
  bool has_poses() const override { return base_->has_poses(); }
  Pose3D pose(size_t example, int view, int time) const override;
  bool has_cameras() const override { return base_->has_cameras(); }
  CameraModel camera(size_t example, int view) const override;
  bool has_background() const override { return base_->has_background(); }
  Image background(size_t example, int view) const override;
  uint64_t content_hash() const override { return hash_; }

 private:
  size_t base_example(size_t example, int view, int time) const;

  DatasetPtr base_;
  std::vector<size_t> kept_;
  std::vector<ExampleInfo> examples_;
  uint64_t hash_ = 0;
};

// FNV-1a, the hash used for dataset and config identities.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}
inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}
// Exact match for literals; without it they would decay to the void*
// overload and the seed would be read as a byte count.
inline uint64_t fnv1a(const char* s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s, std::char_traits<char>::length(s), h);
}
inline uint64_t fnv1a_u64(uint64_t v, uint64_t h) { return fnv1a(&v, 8, h); }

}  // namespace mvsync
