// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <utility>

#include "core/error.hpp"
#include "core/pose.hpp"

namespace mvsync {

// Pinhole camera: p_cam = R * p_world + t, pixel = (f*x/z + cx, f*y/z + cy).
struct CameraModel {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-9)
      throw GeometryError("camera: rotation is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-9)
      throw GeometryError("camera: rotation is not proper");
  }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return R * p_world + t;
  }

  Eigen::Vector2d project_camera_point(const Eigen::Vector3d& p_cam) const {
    if (p_cam.z() <= 1e-9)
      throw GeometryError("camera: point at or behind the camera plane");
    return {f * p_cam.x() / p_cam.z() + cx, f * p_cam.y() / p_cam.z() + cy};
  }

  Eigen::Vector2d project_point(const Eigen::Vector3d& p_world) const {
    return project_camera_point(to_camera(p_world));
  }

  // Right-handed basis with the optical axis toward the target and image v
  // growing downward: z forward, x = z x up, y = z x x.
  static CameraModel look_at(const Eigen::Vector3d& pos,
                             const Eigen::Vector3d& target,
                             const Eigen::Vector3d& up, double f, double cx,
                             double cy) {
    Eigen::Vector3d z = (target - pos).normalized();
    Eigen::Vector3d x = z.cross(up).normalized();
    Eigen::Vector3d y = z.cross(x);
    CameraModel cam;
    cam.R.row(0) = x;
    cam.R.row(1) = y;
    cam.R.row(2) = z;
    cam.t = -cam.R * pos;
    cam.f = f;
    cam.cx = cx;
    cam.cy = cy;
    cam.validate();
    return cam;
  }
};

// Camera-coordinate pose and pixel projections for all joints.
inline std::pair<Pose3D, Eigen::Matrix2Xd> project_pose(
    const Pose3D& pose_world, const CameraModel& cam) {
  Pose3D pc(3, pose_world.cols());
  Eigen::Matrix2Xd px(2, pose_world.cols());
  for (int j = 0; j < pose_world.cols(); ++j) {
    pc.col(j) = cam.to_camera(pose_world.col(j));
    px.col(j) = cam.project_camera_point(pc.col(j));
  }
  return {pc, px};
}

}  // namespace mvsync
