// SPDX-License-Identifier: Apache-2.0
#include "data/dataset.hpp"

#include <algorithm>

#include "core/strutil.hpp"

namespace mvsync {

Image MultiViewDataset::background(size_t, int) const {
  throw StructureError("dataset: no background available");
}

size_t MultiViewDataset::total_frames() const {
  size_t n = 0;
  for (const auto& ex : examples()) n += ex.views.size() * ex.times.size();
  return n;
}

void MultiViewDataset::check_view(size_t example, int view) const {
  const auto& exs = examples();
  if (example >= exs.size())
    throw StructureError("dataset: example index " + format_int(example) +
                         " out of range (" + format_int(exs.size()) + " examples)");
  const auto& ex = exs[example];
  if (!std::binary_search(ex.views.begin(), ex.views.end(), view))
    throw StructureError("dataset: (" + ex.subject + ", " + ex.action +
                         ") has no view " + format_int(view));
}

void MultiViewDataset::check_index(size_t example, int view, int time) const {
  check_view(example, view);
  const auto& ex = examples()[example];
  if (!std::binary_search(ex.times.begin(), ex.times.end(), time))
    throw StructureError("dataset: (" + ex.subject + ", " + ex.action +
                         ", view " + format_int(view) + ") has no frame " +
                         format_int(time));
}

SubsetView::SubsetView(DatasetPtr base, std::vector<size_t> kept_examples,
                       std::vector<std::vector<int>> kept_times)
    : base_(std::move(base)), kept_(std::move(kept_examples)) {
  if (kept_.size() != kept_times.size())
    throw ArgumentError("subset: example/time list size mismatch");
  const auto& base_ex = base_->examples();
  examples_.reserve(kept_.size());
  hash_ = fnv1a_u64(base_->content_hash(), 0xcbf29ce484222325ULL);
  for (size_t i = 0; i < kept_.size(); ++i) {
    if (kept_[i] >= base_ex.size())
      throw ArgumentError("subset: example index out of range");
    const auto& src = base_ex[kept_[i]];
    for (int t : kept_times[i])
      if (!std::binary_search(src.times.begin(), src.times.end(), t))
        throw ArgumentError("subset: time " + format_int(t) +
                            " not in base example (" + src.subject + ", " +
                            src.action + ")");
    ExampleInfo ex;
    ex.subject = src.subject;
    ex.action = src.action;
    ex.views = src.views;
    ex.times = std::move(kept_times[i]);
    hash_ = fnv1a_u64(kept_[i], hash_);
    for (int t : ex.times) hash_ = fnv1a_u64(static_cast<uint64_t>(t), hash_);
    examples_.push_back(std::move(ex));
  }
}

size_t SubsetView::base_example(size_t example, int view, int time) const {
  check_index(example, view, time);
  return kept_[example];
}

Image SubsetView::full_frame(size_t example, int view, int time) const {
  return base_->full_frame(base_example(example, view, time), view, time);
}

BBox SubsetView::bbox(size_t example, int view, int time) const {
  return base_->bbox(base_example(example, view, time), view, time);
}

Pose3D SubsetView::pose(size_t example, int view, int time) const {
  return base_->pose(base_example(example, view, time), view, time);
}

CameraModel SubsetView::camera(size_t example, int view) const {
  check_view(example, view);
  return base_->camera(kept_[example], view);
}

Image SubsetView::background(size_t example, int view) const {
  check_view(example, view);
  return base_->background(kept_[example], view);
}

}  // namespace mvsync
