// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "metrics/metrics.hpp"
#include "oracles.hpp"

using namespace mvsync;

namespace {

Pose3D random_pose(Rng& rng, double spread = 100.0) {
  Pose3D p = make_pose();
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i) p(i, j) = rng.normal(0.0, spread);
  return p;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

TEST_CASE("mpjpe basics") {
  Rng rng(7001);
  Pose3D gt = random_pose(rng);
  CHECK(mpjpe(gt, gt) == doctest::Approx(0.0));

  Pose3D pred = gt;
  pred(0, 5) += 16.0;
  CHECK(mpjpe(pred, gt) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::Matrix3d R = random_rotation(rng);
  CHECK(mpjpe(R * pred, R * gt) == doctest::Approx(mpjpe(pred, gt)).epsilon(1e-12));

  Pose3D bad(3, 12);
  bad.setZero();
  CHECK_THROWS_AS(mpjpe(pred, bad), ArgumentError);
}

TEST_CASE("scale_align closed form matches grid search") {
  Rng rng(7002);
  Pose3D gt = random_pose(rng);
  auto half = scale_align(2.0 * gt, gt);
  CHECK(half.scale == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half.residual == doctest::Approx(0.0));
  CHECK(scale_align(gt, gt).scale == doctest::Approx(1.0).epsilon(1e-12));

  for (int rep = 0; rep < 10; ++rep) {
    Pose3D pred = random_pose(rng);
    Pose3D target = random_pose(rng);
    auto a = scale_align(pred, target);
    double s_search = oracle::best_scale_search(pred, target);
    CHECK(a.scale == doctest::Approx(s_search).epsilon(1e-6));
    // Local optimality of the closed form.
    double up = ((a.scale + 0.01) * pred - target).squaredNorm();
    double dn = ((a.scale - 0.01) * pred - target).squaredNorm();
    CHECK(a.residual <= up);
    CHECK(a.residual <= dn);
  }

  Pose3D zero = make_pose();
  CHECK_THROWS_AS(scale_align(zero, gt), AlignmentError);
}

TEST_CASE("nmpjpe scale invariance and SSE ordering") {
  Rng rng(7003);
  Pose3D gt = random_pose(rng);
  CHECK(nmpjpe(3.7 * gt, gt) == doctest::Approx(0.0).epsilon(1e-9));
  for (int rep = 0; rep < 20; ++rep) {
    Pose3D pred = random_pose(rng);
    double c = rng.uniform(0.1, 10.0);
    CHECK(nmpjpe(c * pred, gt) == doctest::Approx(nmpjpe(pred, gt)).epsilon(1e-9));
    auto a = scale_align(pred, gt);
    CHECK(a.residual <= (pred - gt).squaredNorm() + 1e-9);
  }
}

TEST_CASE("procrustes recovers an applied similarity") {
  Rng rng(7004);
  for (int rep = 0; rep < 20; ++rep) {
    Pose3D gt = random_pose(rng);
    Eigen::Matrix3d R = random_rotation(rng);
    double s = rng.uniform(0.2, 5.0);
    Eigen::Vector3d t(rng.normal(0, 50), rng.normal(0, 50), rng.normal(0, 50));
    Pose3D pred = ((1.0 / s) * (R.transpose() * ((gt.colwise() + (-t)))));
    auto a = procrustes_align(pred, gt);
    CHECK(a.residual < 1e-9);
    CHECK((a.rotation - R).norm() < 1e-6);
    CHECK(a.scale == doctest::Approx(s).epsilon(1e-9));
    CHECK((a.translation - t).norm() < 1e-6);
    CHECK(a.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
  Pose3D gt = random_pose(rng);
  auto id = procrustes_align(gt, gt);
  CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.translation.norm() < 1e-9);
}

TEST_CASE("procrustes residual matches random-restart search") {
  Rng rng(7005);
  Rng search_rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    Pose3D pred = random_pose(rng);
    Pose3D gt = random_pose(rng);
    auto a = procrustes_align(pred, gt);
    double searched = oracle::procrustes_residual_search(pred, gt, search_rng);
    CHECK(a.residual == doctest::Approx(searched).epsilon(1e-3));
    CHECK(a.residual <= searched + 1e-6);
  }
}

TEST_CASE("procrustes rejects degenerate input") {
  Pose3D line = make_pose();
  for (int j = 0; j < kNumJoints; ++j) line(2, j) = 10.0 * j;
  Pose3D gt = make_pose();
  Rng rng(7006);
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i) gt(i, j) = rng.normal(0, 100);
  CHECK_THROWS_AS(procrustes_align(line, gt), AlignmentError);
}

TEST_CASE("pmpjpe chirality and nesting") {
  Rng rng(7007);
  Pose3D gt = random_pose(rng);
  Eigen::Matrix3d R = random_rotation(rng);
  CHECK(pmpjpe(R * gt, gt) == doctest::Approx(0.0).epsilon(1e-9));

  CHECK(pmpjpe(mirror_pose(gt), gt) > 1.0);

  for (int rep = 0; rep < 20; ++rep) {
    Pose3D pred = random_pose(rng);
    Pose3D target = random_pose(rng);
    double raw = (pred - target).squaredNorm();
    double after_scale = scale_align(pred, target).residual;
    double after_procrustes = procrustes_align(pred, target).residual;
    CHECK(after_procrustes <= after_scale + 1e-9);
    CHECK(after_scale <= raw + 1e-9);
  }
}

TEST_CASE("pmpjpe similarity invariance") {
  Rng rng(7008);
  for (int rep = 0; rep < 50; ++rep) {
    Pose3D pred = random_pose(rng);
    Pose3D gt = random_pose(rng);
    double base = pmpjpe(pred, gt);
    Eigen::Matrix3d R = random_rotation(rng);
    double s = rng.uniform(0.2, 5.0);
    Eigen::Vector3d t(rng.normal(0, 30), rng.normal(0, 30), rng.normal(0, 30));
    Pose3D moved = (s * (R * pred)).colwise() + t;
    CHECK(pmpjpe(moved, gt) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("metrics permutation consistency") {
  Rng rng(7009);
  Pose3D pred = random_pose(rng);
  Pose3D gt = random_pose(rng);
  std::vector<int> perm(kNumJoints);
  for (int j = 0; j < kNumJoints; ++j) perm[j] = j;
  for (int j = kNumJoints - 1; j > 0; --j)
    std::swap(perm[j], perm[rng.uniform_int(0, j)]);
  Pose3D pred_p = make_pose(), gt_p = make_pose();
  for (int j = 0; j < kNumJoints; ++j) {
    pred_p.col(j) = pred.col(perm[j]);
    gt_p.col(j) = gt.col(perm[j]);
  }
  CHECK(mpjpe(pred_p, gt_p) == doctest::Approx(mpjpe(pred, gt)).epsilon(1e-12));
  CHECK(nmpjpe(pred_p, gt_p) == doctest::Approx(nmpjpe(pred, gt)).epsilon(1e-12));
  CHECK(pmpjpe(pred_p, gt_p) == doctest::Approx(pmpjpe(pred, gt)).epsilon(1e-9));
}
