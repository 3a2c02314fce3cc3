// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace mvsync {

inline constexpr int kNumJoints = 17;
inline constexpr int kRootJoint = 0;

// 3 x 17 matrix of joint positions, millimetres, column j = joint j.
using Pose3D = Eigen::Matrix3Xd;

// Joint parents: pelvis root, right leg, left leg, spine/head, left arm,
// right arm.
inline constexpr std::array<int, kNumJoints> kJointParents = {
    -1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};

// Left/right joint swaps under a horizontal mirror; the spine chain and the
// root map to themselves.
inline constexpr std::array<std::array<int, 2>, 6> kMirrorPairs = {{
    {1, 4}, {2, 5}, {3, 6}, {11, 14}, {12, 15}, {13, 16}}};

inline Pose3D make_pose() { return Pose3D::Zero(3, kNumJoints); }

// Subtract the root joint from every column; the root lands at the origin.
inline Pose3D root_center(const Pose3D& p) {
  Pose3D out = p;
  Eigen::Vector3d root = p.col(kRootJoint);
  for (int j = 0; j < p.cols(); ++j) out.col(j) -= root;
  return out;
}

// Mirror a pose about the x = 0 plane and swap left/right joint labels.
inline Pose3D mirror_pose(const Pose3D& p) {
  Pose3D out = p;
  out.row(0) = -p.row(0);
  for (const auto& pr : kMirrorPairs) {
    Eigen::Vector3d a = out.col(pr[0]);
    out.col(pr[0]) = out.col(pr[1]);
    out.col(pr[1]) = a;
  }
  return out;
}

}  // namespace mvsync
