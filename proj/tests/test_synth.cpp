// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "data/disk.hpp"
#include "metrics/metrics.hpp"
#include "oracles.hpp"
#include "synth/generate.hpp"
#include "synth/render.hpp"
#include "synth/skeleton.hpp"

using namespace mvsync;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.seed = 11;
  cfg.n_subjects = 2;
  cfg.n_actions = 1;
  cfg.n_views = 4;
  cfg.n_frames = 30;
  cfg.image_size = 64;
  return cfg;
}

bool images_equal(const Image& a, const Image& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("forward kinematics preserves the subject's bone lengths") {
  SkeletonModel skel = SkeletonModel::for_subject(7);
  SkeletonModel again = SkeletonModel::for_subject(7);
  for (int j = 0; j < kNumJoints; ++j)
    CHECK(skel.bone_length[j] == again.bone_length[j]);

  auto traj = sample_trajectory(skel, 50, 123);
  REQUIRE(traj.size() == 50);
  for (const Pose3D& p : traj)
    for (int j = 1; j < kNumJoints; ++j) {
      double len = (p.col(j) - p.col(kJointParents[j])).norm();
      CHECK(len == doctest::Approx(skel.bone_length[j]).epsilon(1e-9));
    }

  auto single = sample_trajectory(skel, 1, 5);
  CHECK(single.size() == 1);
  CHECK((single[0].col(3) - single[0].col(2)).norm() ==
        doctest::Approx(skel.bone_length[3]).epsilon(1e-9));
}

TEST_CASE("trajectories are deterministic, bounded, and keep moving") {
  SkeletonModel skel = SkeletonModel::for_subject(3);
  auto a = sample_trajectory(skel, 200, 42);
  auto b = sample_trajectory(skel, 200, 42);
  for (size_t t = 0; t < a.size(); ++t)
    CHECK((a[t] - b[t]).cwiseAbs().maxCoeff() == 0.0);

  auto c = sample_trajectory(skel, 200, 43);
  double diff = 0.0;
  for (size_t t = 0; t < a.size(); ++t)
    diff = std::max(diff, (a[t] - c[t]).cwiseAbs().maxCoeff());
  CHECK(diff > 1.0);

  for (const Pose3D& p : a) {
    Eigen::Vector2d xz(p(0, kRootJoint), p(2, kRootJoint));
    CHECK(xz.norm() <= 500.0 + 1e-9);
    CHECK(p(1, kRootJoint) > 0.0);
  }

  // Frames at least d_min apart stay visibly different poses.
  double min_motion = 1e18;
  for (size_t t = 0; t + 4 < a.size(); ++t)
    min_motion =
        std::min(min_motion, (a[t + 4] - a[t]).colwise().norm().mean());
  CHECK(min_motion > 2.0);

  CHECK_THROWS_AS(sample_trajectory(skel, 0, 1), ArgumentError);
  CHECK_THROWS_AS(sample_trajectory(skel, 10, 1, 0.0), ArgumentError);
}

TEST_CASE("look_at cameras are proper rotations aimed at the target") {
  Eigen::Vector3d target(0, 900, 0);
  CameraModel cam =
      CameraModel::look_at({2700, 1600, 2700}, target, {0, 1, 0}, 100, 48, 48);
  CHECK(cam.R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::Vector2d center = cam.project_point(target);
  CHECK(center.x() == doctest::Approx(48.0).epsilon(1e-12));
  CHECK(center.y() == doctest::Approx(48.0).epsilon(1e-12));
  // World-up points move toward smaller v: image y grows downward.
  Eigen::Vector2d above = cam.project_point(target + Eigen::Vector3d(0, 100, 0));
  CHECK(above.y() < center.y());

  CHECK_THROWS_AS(cam.project_point({2700, 1600, 2700}), GeometryError);
  CameraModel bad;
  bad.R(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), GeometryError);
}

TEST_CASE("projection agrees with the homogeneous-matrix oracle") {
  Rng rng(99);
  SkeletonModel skel = SkeletonModel::for_subject(1);
  auto traj = sample_trajectory(skel, 20, 7);
  for (int k = 0; k < 6; ++k) {
    double th = rng.uniform(0.0, 6.28);
    CameraModel cam = CameraModel::look_at(
        {3800 * std::cos(th), rng.uniform(1000.0, 2200.0), 3800 * std::sin(th)},
        {0, 900, 0}, {0, 1, 0}, rng.uniform(60.0, 140.0), 48, 48);
    for (const Pose3D& w : traj) {
      auto [pc, px] = project_pose(w, cam);
      Eigen::Matrix2Xd ref =
          oracle::project_homogeneous(w, cam.R, cam.t, cam.f, cam.cx, cam.cy);
      CHECK((px - ref).cwiseAbs().maxCoeff() < 1e-6);
      for (int j = 0; j < kNumJoints; ++j)
        CHECK((pc.col(j) - (cam.R * w.col(j) + cam.t)).norm() < 1e-9);
    }
  }

  // Identity camera: camera coordinates equal world coordinates.
  CameraModel ident;
  ident.f = 100;
  Pose3D w = traj[0];
  w.row(2).array() += 5000.0;  // push in front of the camera
  auto [pc, px] = project_pose(w, ident);
  CHECK((pc - w).cwiseAbs().maxCoeff() == 0.0);

  // Pure translation: pairwise distances unchanged.
  CameraModel trans;
  trans.t = {100, -50, 7000};
  trans.f = 100;
  auto pct = project_pose(traj[0], trans).first;
  for (int i = 0; i < kNumJoints; ++i)
    for (int j = i + 1; j < kNumJoints; ++j)
      CHECK((pct.col(i) - pct.col(j)).norm() ==
            doctest::Approx((traj[0].col(i) - traj[0].col(j)).norm())
                .epsilon(1e-12));
}

TEST_CASE("all views of one time are rigid images of one world pose") {
  auto ds = generate_dataset(small_scene());
  for (size_t e = 0; e < ds->examples().size(); ++e) {
    const auto& ex = ds->examples()[e];
    for (int t : {1, 11, 30}) {
      const Pose3D& w = ds->world_pose(e, t);
      for (int v : ex.views) {
        CameraModel cam = ds->camera(e, v);
        Pose3D pc = ds->pose(e, v, t);
        // Undo the extrinsics: the recovered world pose must match.
        Pose3D back = cam.R.transpose() * (pc.colwise() - cam.t);
        CHECK((back - w).cwiseAbs().maxCoeff() < 1e-6);
        for (int i = 0; i < kNumJoints; ++i)
          for (int j = i + 1; j < kNumJoints; ++j)
            CHECK((pc.col(i) - pc.col(j)).norm() ==
                  doctest::Approx((w.col(i) - w.col(j)).norm()).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("well-separated times are never near-rigid copies") {
  SceneConfig cfg = small_scene();
  cfg.n_frames = 200;
  cfg.n_subjects = 1;
  auto ds = generate_dataset(cfg);
  double floor_mm = 2.0;
  for (int t1 : {1, 40, 90}) {
    for (int dt : {5, 20, 64, 110}) {
      const Pose3D& a = ds->world_pose(0, t1);
      const Pose3D& b = ds->world_pose(0, t1 + dt);
      CHECK(pmpjpe(a, b) > floor_mm);
    }
  }
}

TEST_CASE("rendering is deterministic and masks match coverage") {
  auto ds = generate_dataset(small_scene());
  Image first = ds->full_frame(0, 1, 5);   // fresh rasterization
  Image second = ds->full_frame(0, 1, 5);  // decoded from the byte cache
  CHECK(images_equal(first, second));

  auto ds2 = generate_dataset(small_scene());
  CHECK(images_equal(first, ds2->full_frame(0, 1, 5)));

  auto cov = ds->coverage_mask(0, 1, 5);
  Image bg = ds->background(0, 1);
  REQUIRE(cov.size() == first.pixels());
  size_t on = 0;
  for (int y = 0; y < first.height(); ++y)
    for (int x = 0; x < first.width(); ++x) {
      float c = cov[static_cast<size_t>(y) * first.width() + x];
      if (c == 0.0f) {
        CHECK(first.at(0, x, y) == bg.at(0, x, y));
        CHECK(first.at(1, x, y) == bg.at(1, x, y));
        CHECK(first.at(2, x, y) == bg.at(2, x, y));
      } else {
        ++on;
      }
    }
  CHECK(on > 50);
  CHECK(on < first.pixels() / 2);

  // The raster is background-independent: same coverage over any backdrop,
  // and fully covered pixels carry pure body color.
  Image other_bg = render_background(first.width(), 999);
  const Pose3D& w = ds->world_pose(0, 5);
  auto [pc, px] = project_pose(w, ds->camera(0, 1));
  std::vector<float> cov_a, cov_b;
  Image ra = render_view(pc, px, ds->camera(0, 1), bg, {0.9, 0.4, 0.2}, &cov_a);
  Image rb =
      render_view(pc, px, ds->camera(0, 1), other_bg, {0.9, 0.4, 0.2}, &cov_b);
  CHECK(cov_a == cov_b);
  for (int y = 0; y < ra.height(); ++y)
    for (int x = 0; x < ra.width(); ++x)
      if (cov_a[static_cast<size_t>(y) * ra.width() + x] == 1.0f) {
        CHECK(ra.at(0, x, y) == rb.at(0, x, y));
        CHECK(ra.at(1, x, y) == rb.at(1, x, y));
        CHECK(ra.at(2, x, y) == rb.at(2, x, y));
      }
}

TEST_CASE("backgrounds differ per view and asymmetry is controllable") {
  auto ds = generate_dataset(small_scene());
  auto mean_abs_diff = [](const Image& a, const Image& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      d += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
    return d / a.size();
  };
  Image b1 = ds->background(0, 1);
  Image b2 = ds->background(0, 2);
  CHECK(mean_abs_diff(b1, b2) > 0.01);
  // Asymmetric by default, so a mirrored frame betrays itself.
  CHECK(mean_abs_diff(b1, mirror_horizontal(b1)) > 0.01);

  SceneConfig sym = small_scene();
  sym.symmetric_backgrounds = true;
  auto dss = generate_dataset(sym);
  Image sb = dss->background(0, 1);
  CHECK(images_equal(sb, mirror_horizontal(sb)));
}

TEST_CASE("generated datasets count and index like the config says") {
  SceneConfig cfg;
  cfg.seed = 4;
  cfg.n_subjects = 2;
  cfg.n_actions = 1;
  cfg.n_views = 4;
  cfg.n_frames = 200;
  cfg.image_size = 64;
  auto ds = generate_dataset(cfg);
  CHECK(ds->examples().size() == 2);
  CHECK(ds->total_frames() == 1600);
  for (const auto& ex : ds->examples()) {
    CHECK(ex.views == std::vector<int>{1, 2, 3, 4});
    CHECK(ex.times.size() == 200);
    CHECK(ex.times.front() == 1);
    CHECK(ex.times.back() == 200);
  }
  CHECK(ds->has_poses());
  CHECK(ds->has_cameras());

  CHECK_THROWS_AS(ds->full_frame(0, 5, 1), StructureError);
  CHECK_THROWS_AS(ds->full_frame(0, 1, 0), StructureError);
  CHECK_THROWS_AS(ds->full_frame(0, 1, 201), StructureError);
  CHECK_THROWS_AS(ds->full_frame(2, 1, 1), StructureError);
  CHECK_THROWS_WITH_AS(ds->full_frame(0, 5, 1),
                       doctest::Contains("no view 5"), StructureError);

  SceneConfig bad = cfg;
  bad.n_views = 1;
  CHECK_THROWS_AS(generate_dataset(bad), ConfigError);

  CHECK(ds->content_hash() == generate_dataset(cfg)->content_hash());
  SceneConfig other = cfg;
  other.seed = 5;
  CHECK(ds->content_hash() != generate_dataset(other)->content_hash());
}

TEST_CASE("a dataset written to disk loads back frame for frame") {
  SceneConfig cfg;
  cfg.seed = 21;
  cfg.n_subjects = 2;
  cfg.n_actions = 1;
  cfg.n_views = 2;
  cfg.n_frames = 8;
  cfg.image_size = 48;
  auto ds = generate_dataset(cfg);

  fs::path root = fs::temp_directory_path() / "mvsync_roundtrip";
  fs::remove_all(root);
  write_dataset(*ds, root.string());
  auto back = load_dataset(root.string());

  REQUIRE(back->examples().size() == ds->examples().size());
  CHECK(back->has_poses());
  CHECK(back->has_cameras());
  for (size_t e = 0; e < ds->examples().size(); ++e) {
    const auto& ex = ds->examples()[e];
    CHECK(back->examples()[e].subject == ex.subject);
    CHECK(back->examples()[e].action == ex.action);
    CHECK(back->examples()[e].views == ex.views);
    CHECK(back->examples()[e].times == ex.times);
    for (int v : ex.views) {
      CameraModel ca = ds->camera(e, v), cb = back->camera(e, v);
      CHECK((ca.R - cb.R).cwiseAbs().maxCoeff() == 0.0);
      CHECK((ca.t - cb.t).cwiseAbs().maxCoeff() == 0.0);
      CHECK(ca.f == cb.f);
      for (int t : ex.times) {
        CHECK(images_equal(ds->full_frame(e, v, t), back->full_frame(e, v, t)));
        CHECK((ds->pose(e, v, t) - back->pose(e, v, t)).cwiseAbs().maxCoeff() ==
              0.0);
        BBox ba = ds->bbox(e, v, t), bb = back->bbox(e, v, t);
        CHECK(ba.cx == bb.cx);
        CHECK(ba.cy == bb.cy);
        CHECK(ba.size == bb.size);
      }
    }
  }
  CHECK(back->content_hash() == load_dataset(root.string())->content_hash());

  // Structural damage is reported with the offending index.
  fs::remove(root / "S1" / "A1" / "view_1" / "frame_000003.png");
  CHECK_THROWS_WITH_AS(load_dataset(root.string()),
                       doctest::Contains("t=3"), StructureError);
  fs::remove_all(root / "S1" / "A1" / "view_1");
  CHECK_THROWS_WITH_AS(load_dataset(root.string()),
                       doctest::Contains("missing view 1"), StructureError);
  fs::remove(root / "S2" / "A1" / "bboxes_view_2.csv");
  CHECK_THROWS_AS(load_dataset(root.string()), StructureError);
  fs::remove_all(root);
}
