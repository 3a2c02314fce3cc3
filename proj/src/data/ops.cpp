// SPDX-License-Identifier: Apache-2.0
#include "data/ops.hpp"

#include <algorithm>
#include <cmath>

namespace mvsync {

Image crop_subject(const Image& frame, const BBox& box, int out_size) {
  if (!(box.size > 0.0)) throw ArgumentError("crop_subject: empty bbox");
  if (out_size <= 0) throw ArgumentError("crop_subject: out_size must be > 0");
  return sample_patch(frame, box.cx, box.cy, box.size, out_size);
}

Pose3D rotation_correct_pose(const Pose3D& pose, const CameraModel& intrinsics,
                             const Eigen::Vector2d& crop_center) {
  if (!(intrinsics.f > 0.0))
    throw ArgumentError("rotation_correct_pose: non-positive focal length");
  Eigen::Vector3d ray((crop_center.x() - intrinsics.cx) / intrinsics.f,
                      (crop_center.y() - intrinsics.cy) / intrinsics.f, 1.0);
  if (!ray.allFinite())
    throw ArgumentError("rotation_correct_pose: invalid crop center");
  ray.normalize();
  // Minimal rotation taking z = (0,0,1) to the ray: axis = z x ray.
  Eigen::Vector3d axis(-ray.y(), ray.x(), 0.0);
  double s = axis.norm();
  double c = ray.z();
  if (s < 1e-15) return pose;
  axis /= s;
  Eigen::Matrix3d K;
  K << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  Eigen::Matrix3d W = Eigen::Matrix3d::Identity() + s * K + (1.0 - c) * K * K;
  return W.transpose() * pose;
}

double motion_between(const MultiViewDataset& ds, size_t example, int t_a,
                      int t_b) {
  const ExampleInfo& ex = ds.examples()[example];
  if (ds.has_poses()) {
    int v = ex.views.front();
    Pose3D a = ds.pose(example, v, t_a);
    Pose3D b = ds.pose(example, v, t_b);
    return (b - a).colwise().norm().mean();
  }
  double acc = 0.0;
  for (int v : ex.views) {
    Image a = ds.full_frame(example, v, t_a);
    Image b = ds.full_frame(example, v, t_b);
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      d += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
    acc += d / a.size();
  }
  return acc / ex.views.size();
}

namespace {

std::vector<std::vector<int>> greedy_keep(const MultiViewDataset& ds,
                                          double threshold) {
  std::vector<std::vector<int>> kept;
  for (size_t e = 0; e < ds.examples().size(); ++e) {
    const auto& times = ds.examples()[e].times;
    std::vector<int> k;
    for (int t : times) {
      if (k.empty() || motion_between(ds, e, k.back(), t) >= threshold)
        k.push_back(t);
    }
    kept.push_back(std::move(k));
  }
  return kept;
}

DatasetPtr subset_all_examples(DatasetPtr ds, std::vector<std::vector<int>> times) {
  std::vector<size_t> all(ds->examples().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  return std::make_shared<SubsetView>(std::move(ds), std::move(all), std::move(times));
}

}  // namespace

DatasetPtr filter_static(DatasetPtr ds, double motion_threshold) {
  if (motion_threshold < 0.0)
    throw ArgumentError("filter_static: negative threshold");
  if (motion_threshold == 0.0) return ds;
  return subset_all_examples(ds, greedy_keep(*ds, motion_threshold));
}

DatasetPtr eval_subsample(DatasetPtr ds, int stride) {
  if (stride <= 0) throw ArgumentError("eval_subsample: stride must be >= 1");
  std::vector<std::vector<int>> kept;
  for (const auto& ex : ds->examples()) {
    std::vector<int> k;
    for (int t : ex.times)
      if ((t - 1) % stride == 0) k.push_back(t);
    kept.push_back(std::move(k));
  }
  return subset_all_examples(std::move(ds), std::move(kept));
}

DatasetPtr select_subjects(DatasetPtr ds,
                           const std::vector<std::string>& subjects) {
  std::vector<size_t> keep;
  std::vector<std::vector<int>> times;
  for (size_t e = 0; e < ds->examples().size(); ++e) {
    const auto& ex = ds->examples()[e];
    if (std::find(subjects.begin(), subjects.end(), ex.subject) != subjects.end()) {
      keep.push_back(e);
      times.push_back(ex.times);
    }
  }
  if (keep.empty()) throw ArgumentError("select_subjects: no matching subject");
  return std::make_shared<SubsetView>(std::move(ds), std::move(keep), std::move(times));
}

double calibrate_motion_threshold(DatasetPtr ds, double target_retained) {
  if (!(target_retained > 0.0 && target_retained < 1.0))
    throw ArgumentError("calibrate_motion_threshold: target must be in (0,1)");
  size_t total = 0;
  for (const auto& ex : ds->examples()) total += ex.times.size();
  if (total == 0) throw ArgumentError("calibrate_motion_threshold: empty dataset");

  auto retained = [&](double tau) {
    size_t kept = 0;
    for (const auto& k : greedy_keep(*ds, tau)) kept += k.size();
    return static_cast<double>(kept) / total;
  };

  double lo = 0.0, hi = 1.0;
  while (retained(hi) > target_retained && hi < 1e7) hi *= 4.0;
  double best_tau = hi, best_gap = std::abs(retained(hi) - target_retained);
  for (int it = 0; it < 48; ++it) {
    double mid = 0.5 * (lo + hi);
    double r = retained(mid);
    if (std::abs(r - target_retained) < best_gap) {
      best_gap = std::abs(r - target_retained);
      best_tau = mid;
    }
    if (r > target_retained)
      lo = mid;
    else
      hi = mid;
  }
  return best_tau;
}

}  // namespace mvsync
