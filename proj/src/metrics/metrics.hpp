// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "core/pose.hpp"

namespace mvsync {

struct AlignmentResult {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double residual = 0.0;  // sum of squared errors, mm^2
};

struct MetricReport {
  double mpjpe_mm = 0.0;
  double nmpjpe_mm = 0.0;
  double pmpjpe_mm = 0.0;
  int64_t n_samples = 0;
  double correction = 0.0;
};

// Joint-count correction for a fixed (non-regressed) root joint.
inline double joint_correction(int n_joints) {
  return static_cast<double>(n_joints) / (n_joints - 1);
}

// Mean per-joint position error with the fixed-root correction applied.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

// Least-squares uniform scale of pred onto gt.
AlignmentResult scale_align(const Pose3D& pred, const Pose3D& gt);

// mpjpe after optimal uniform scaling.
double nmpjpe(const Pose3D& pred, const Pose3D& gt);

// Full similarity alignment (scale, proper rotation, translation) of pred
// onto gt. Reflections are never returned.
AlignmentResult procrustes_align(const Pose3D& pred, const Pose3D& gt);

// mpjpe after similarity alignment.
double pmpjpe(const Pose3D& pred, const Pose3D& gt);

inline Pose3D apply_alignment(const AlignmentResult& a, const Pose3D& p) {
  return (a.scale * (a.rotation * p)).colwise() + a.translation;
}

}  // namespace mvsync
