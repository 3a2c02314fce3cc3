// SPDX-License-Identifier: Apache-2.0
#include "pose/transfer.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvsync {

PoseNormalizer fit_normalizer(const std::vector<Pose3D>& poses) {
  if (poses.empty()) throw ArgumentError("fit_normalizer: no poses");
  PoseNormalizer n;
  n.mean.setZero();
  for (const auto& p : poses) n.mean += p;
  n.mean /= static_cast<double>(poses.size());
  Pose3D sq = Pose3D::Zero(3, kNumJoints);
  for (const auto& p : poses) {
    Pose3D d = p - n.mean;
    sq += d.cwiseProduct(d);
  }
  sq /= static_cast<double>(poses.size());
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i)
      n.stddev(i, j) = std::max(std::sqrt(sq(i, j)), 1e-3);
  return n;
}

std::pair<Image, Pose3D> flip_pose_pair(const Image& frame, const Pose3D& pose) {
  return {mirror_horizontal(frame), mirror_pose(pose)};
}

}  // namespace mvsync
