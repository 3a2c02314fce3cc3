// SPDX-License-Identifier: Apache-2.0
#include "synth/skeleton.hpp"

#include <algorithm>
#include <cmath>

namespace mvsync {

namespace {

Eigen::Matrix3d yaw_matrix(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

// Unit direction of a limb segment swung fore-aft by `swing` from straight
// down, in the body frame.
Eigen::Vector3d swing_down(double swing) {
  return {0.0, -std::cos(swing), std::sin(swing)};
}

}  // namespace

Pose3D pose_from_gait(const SkeletonModel& skel, const GaitState& g) {
  Pose3D body = make_pose();
  const auto& L = skel.bone_length;

  body.col(0) = Eigen::Vector3d::Zero();  // pelvis

  // Legs: 1-3 right (body -x), 4-6 left (+x). Hips sit laterally at their
  // full bone length from the pelvis.
  body.col(1) = body.col(0) + Eigen::Vector3d(-L[1], 0, 0);
  body.col(4) = body.col(0) + Eigen::Vector3d(L[4], 0, 0);
  body.col(2) = body.col(1) + L[2] * swing_down(g.hip_r);
  body.col(5) = body.col(4) + L[5] * swing_down(g.hip_l);
  body.col(3) = body.col(2) + L[3] * swing_down(g.hip_r - g.knee_r);
  body.col(6) = body.col(5) + L[6] * swing_down(g.hip_l - g.knee_l);

  // Spine chain with a small forward lean: 7 spine, 8 thorax, 9 neck, 10 head.
  Eigen::Vector3d up_lean(0.0, std::cos(g.lean), std::sin(g.lean));
  body.col(7) = body.col(0) + L[7] * up_lean;
  body.col(8) = body.col(7) + L[8] * up_lean;
  body.col(9) = body.col(8) + L[9] * up_lean;
  Eigen::Vector3d head_dir(0.0, std::cos(g.lean + g.head_nod),
                           std::sin(g.lean + g.head_nod));
  body.col(10) = body.col(9) + L[10] * head_dir;

  // Arms: 11-13 left (+x), 14-16 right (-x), hanging from the thorax.
  body.col(11) = body.col(8) + Eigen::Vector3d(L[11], 0, 0);
  body.col(14) = body.col(8) + Eigen::Vector3d(-L[14], 0, 0);
  body.col(12) = body.col(11) + L[12] * swing_down(g.shoulder_l);
  body.col(15) = body.col(14) + L[15] * swing_down(g.shoulder_r);
  body.col(13) = body.col(12) + L[13] * swing_down(g.shoulder_l + g.elbow_l);
  body.col(16) = body.col(15) + L[16] * swing_down(g.shoulder_r + g.elbow_r);

  Eigen::Matrix3d Ry = yaw_matrix(g.yaw);
  Pose3D world = make_pose();
  for (int j = 0; j < kNumJoints; ++j)
    world.col(j) = g.root_pos + Ry * body.col(j);
  return world;
}

std::vector<Pose3D> sample_trajectory(const SkeletonModel& skel, int n_frames,
                                      uint64_t seed, double smoothness) {
  if (n_frames < 1) throw ArgumentError("sample_trajectory: n_frames < 1");
  if (smoothness <= 0.0)
    throw ArgumentError("sample_trajectory: non-positive smoothness");
  Rng rng = Rng::substream(seed, 0x747261ULL);

  // Incommensurate stride and arm periods, per-trajectory detuned.
  double leg_period = 37.3 * (0.9 + 0.2 * rng.uniform()) * smoothness;
  double arm_period = 51.7 * (0.9 + 0.2 * rng.uniform()) * smoothness;
  double wl = 2.0 * 3.14159265358979323846 / leg_period;
  double wa = 2.0 * 3.14159265358979323846 / arm_period;
  double phase_leg = rng.uniform(0.0, 6.28318530717958647692);
  double phase_arm = rng.uniform(0.0, 6.28318530717958647692);

  double leg_amp = 0.45 + 0.2 * rng.uniform();
  double arm_amp = 0.35 + 0.2 * rng.uniform();
  double knee_amp = 0.5 + 0.3 * rng.uniform();
  double elbow_amp = 0.4 + 0.3 * rng.uniform();

  // Exponentially smoothed random-walk wobbles, one per degree of freedom.
  double alpha = std::exp(-1.0 / (6.0 * smoothness));
  std::array<double, 9> wobble{};
  auto wob = [&](int i, double sigma) {
    wobble[i] = alpha * wobble[i] + (1.0 - alpha) * rng.normal(0.0, sigma);
    return wobble[i];
  };

  // The subject strolls between waypoints inside the capture disc, so over
  // enough frames every pixel sees the backdrop most of the time.
  auto draw_point = [&](double radius) {
    double a = rng.uniform(0.0, 6.28318530717958647692);
    double r = radius * std::sqrt(rng.uniform());
    return Eigen::Vector2d(r * std::sin(a), r * std::cos(a));
  };
  Eigen::Vector2d walk = draw_point(430.0);
  Eigen::Vector2d waypoint = draw_point(430.0);
  double yaw = rng.uniform(0.0, 6.28318530717958647692);
  double speed_base = rng.uniform(14.0, 22.0);
  double speed_period = 173.0 * (0.8 + 0.4 * rng.uniform()) * smoothness;
  double ws = 2.0 * 3.14159265358979323846 / speed_period;
  double phase_speed = rng.uniform(0.0, 6.28318530717958647692);
  int waypoint_age = 0;

  double pelvis_height = (skel.bone_length[2] + skel.bone_length[3]) * 0.96;

  std::vector<Pose3D> out;
  out.reserve(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    GaitState g;
    g.root_pos = {walk.x(), pelvis_height, walk.y()};
    g.yaw = yaw;
    g.lean = 0.06 * std::sin(wl * t + phase_leg * 0.5) + wob(0, 0.05);
    double leg = std::sin(wl * t + phase_leg);
    g.hip_r = leg_amp * leg + wob(1, 0.12);
    g.hip_l = -leg_amp * leg + wob(2, 0.12);
    g.knee_r = knee_amp * 0.5 * (1.0 + std::sin(wl * t + phase_leg + 1.2)) +
               std::abs(wob(3, 0.1));
    g.knee_l = knee_amp * 0.5 * (1.0 - std::sin(wl * t + phase_leg + 1.2)) +
               std::abs(wob(4, 0.1));
    double arm = std::sin(wa * t + phase_arm);
    g.shoulder_l = arm_amp * arm + wob(5, 0.12);
    g.shoulder_r = -arm_amp * arm + wob(6, 0.12);
    g.elbow_l = elbow_amp * 0.5 * (1.0 + std::sin(wa * t + phase_arm + 0.9));
    g.elbow_r = elbow_amp * 0.5 * (1.0 - std::sin(wa * t + phase_arm + 0.9));
    g.head_nod = wob(7, 0.06);
    out.push_back(pose_from_gait(skel, g));

    // Advance the stroll after emitting the frame. A new waypoint is drawn
    // on arrival or after a stall (a tight turn circle can orbit a target).
    Eigen::Vector2d to_wp = waypoint - walk;
    ++waypoint_age;
    if (to_wp.norm() < 120.0 || waypoint_age > 300) {
      waypoint = draw_point(430.0);
      to_wp = waypoint - walk;
      waypoint_age = 0;
    }
    double desired = std::atan2(to_wp.x(), to_wp.y());
    double turn = std::remainder(desired - yaw, 6.28318530717958647692);
    yaw += std::clamp(turn, -0.12, 0.12) + rng.normal(0.0, 0.01);
    double envelope = 0.72 + 0.42 * std::sin(ws * t + phase_speed) +
                      wob(8, 0.15);
    double speed = speed_base * std::clamp(envelope, 0.28, 1.25);
    walk += speed * Eigen::Vector2d(std::sin(yaw), std::cos(yaw));
    double r = walk.norm();
    if (r > 500.0) walk *= 500.0 / r;  // keep inside the capture volume
  }
  return out;
}

}  // namespace mvsync
