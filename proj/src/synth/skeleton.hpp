// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "core/pose.hpp"
#include "core/rng.hpp"

namespace mvsync {

// Articulated figure: the shared 17-joint tree plus per-subject bone lengths.
// Joints: 0 pelvis; 1-3 right leg; 4-6 left leg; 7-10 spine/neck/head;
// 11-13 left arm; 14-16 right arm.
struct SkeletonModel {
  std::array<double, kNumJoints> bone_length{};  // mm, from parent; root 0

  static SkeletonModel for_subject(uint64_t seed) {
    Rng rng = Rng::substream(seed, 0x736b656cULL);
    double scale = 0.93 + 0.14 * rng.uniform();
    SkeletonModel s;
    const double base[kNumJoints] = {0,   130, 440, 430, 130, 440, 430, 230, 250,
                                     115, 120, 150, 280, 250, 150, 280, 250};
    for (int j = 0; j < kNumJoints; ++j) s.bone_length[j] = scale * base[j];
    return s;
  }
};

// One frame of the parametric walk: joint rotations driving forward
// kinematics. Angles are radians in the body frame (x lateral, y up,
// z facing).
struct GaitState {
  Eigen::Vector3d root_pos = Eigen::Vector3d::Zero();  // world, mm
  double yaw = 0.0;
  double lean = 0.0;
  double hip_r = 0.0, hip_l = 0.0;
  double knee_r = 0.0, knee_l = 0.0;
  double shoulder_l = 0.0, shoulder_r = 0.0;
  double elbow_l = 0.0, elbow_r = 0.0;
  double head_nod = 0.0;
};

// World-space pose from a gait state; bone lengths are preserved exactly
// because every segment is a unit direction scaled by its length.
Pose3D pose_from_gait(const SkeletonModel& skel, const GaitState& g);

// Smooth deterministic trajectory: two incommensurate sinusoid families plus
// an exponentially smoothed random walk, bounded to the capture volume.
std::vector<Pose3D> sample_trajectory(const SkeletonModel& skel, int n_frames,
                                      uint64_t seed, double smoothness = 1.0);

}  // namespace mvsync
