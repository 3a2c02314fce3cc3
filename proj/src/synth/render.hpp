// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "core/image.hpp"
#include "core/pose.hpp"
#include "core/camera.hpp"

namespace mvsync {

// Static procedural backdrop: layered value noise plus a few rectangles.
// Deliberately left/right asymmetric unless symmetric is requested.
Image render_background(int size, uint64_t seed, bool symmetric = false);

// Deterministic per-subject body color, bright against the muted backdrops.
Eigen::Vector3d subject_color(uint64_t seed);

// Draw the figure as anti-aliased capsules along bones over the background,
// far bones first. Right-side limbs are shaded darker so chirality is
// visible. If coverage is non-null it receives the per-pixel capsule
// coverage in [0,1] (union over bones). Output is quantized to 8-bit levels.
Image render_view(const Pose3D& pose_cam, const Eigen::Matrix2Xd& proj,
                  const CameraModel& cam, const Image& background,
                  const Eigen::Vector3d& body_color,
                  std::vector<float>* coverage = nullptr);

}  // namespace mvsync
