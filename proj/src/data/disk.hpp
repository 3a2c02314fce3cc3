// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "data/dataset.hpp"

namespace mvsync {

// Directory-backed dataset:
//   <root>/<subject>/<action>/view_<v>/frame_<t:06d>.png
//   <root>/<subject>/<action>/bboxes_view_<v>.csv   (t,cx,cy,size; required)
//   <root>/<subject>/<action>/poses_view_<v>.csv    (t,j0x..j16z; optional)
//   <root>/<subject>/<action>/cameras.json          (optional)
//   <root>/<subject>/<action>/bg_view_<v>.png       (optional cache)
// Annotations load eagerly; pixels load on first access and stay cached as
// 8-bit planes.
class DiskDataset : public MultiViewDataset {
 public:
  explicit DiskDataset(const std::string& root);

  using MultiViewDataset::bbox;
  using MultiViewDataset::full_frame;
  using MultiViewDataset::pose;

  const std::vector<ExampleInfo>& examples() const override { return examples_; }
  Image full_frame(size_t example, int view, int time) const override;
  BBox bbox(size_t example, int view, int time) const override;
  bool has_poses() const override { return has_poses_; }
  Pose3D pose(size_t example, int view, int time) const override;
  bool has_cameras() const override { return has_cameras_; }
  CameraModel camera(size_t example, int view) const override;
  bool has_background() const override { return has_background_; }
  Image background(size_t example, int view) const override;
  uint64_t content_hash() const override { return hash_; }

  const std::string& root() const { return root_; }

 private:
  struct ViewData {
    std::map<int, BBox> bboxes;           // by time
    std::map<int, Pose3D> poses;          // by time, camera coords
    CameraModel camera;
    std::string frame_dir;
    std::string bg_path;
  };
  struct ExampleData {
    std::vector<ViewData> views;  // by view-1
  };

  const ViewData& view_data(size_t example, int view, int time) const;

  std::string root_;
  std::vector<ExampleInfo> examples_;
  std::vector<ExampleData> data_;
  bool has_poses_ = false;
  bool has_cameras_ = false;
  bool has_background_ = false;
  uint64_t hash_ = 0;
  mutable std::vector<std::vector<uint8_t>> frame_cache_;
  std::vector<size_t> cache_offset_;  // per example
};

DatasetPtr load_dataset(const std::string& root);

// Persist any dataset in the directory layout above (backgrounds excluded;
// those are an estimation cache, not source data).
void write_dataset(const MultiViewDataset& ds, const std::string& root);

}  // namespace mvsync
