// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "data/ops.hpp"
#include "synth/generate.hpp"

using namespace mvsync;

namespace {

// Hand-built dataset with a scripted motion profile: position advances
// 10 mm per frame except during a freeze window, mirrored by the frame
// brightness so both motion measures see the same pattern.
class ScriptedDataset : public MultiViewDataset {
 public:
  ScriptedDataset(int n_frames, int freeze_begin, int freeze_end,
                  bool with_poses)
      : with_poses_(with_poses) {
    ExampleInfo ex;
    ex.subject = "S1";
    ex.action = "A1";
    ex.views = {1, 2};
    for (int t = 1; t <= n_frames; ++t) ex.times.push_back(t);
    examples_.push_back(std::move(ex));
    freeze_begin_ = freeze_begin;
    freeze_end_ = freeze_end;
  }

  // Cumulative travel: frozen frames repeat the previous position.
  double travel(int time) const {
    double d = 0.0;
    for (int t = 2; t <= time; ++t)
      if (t <= freeze_begin_ || t > freeze_end_) d += 10.0;
    return d;
  }

  const std::vector<ExampleInfo>& examples() const override { return examples_; }

  Image full_frame(size_t example, int view, int time) const override {
    check_index(example, view, time);
    Image img(8, 8);
    float v = static_cast<float>(travel(time) / 1000.0);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = v;
    return img;
  }

  BBox bbox(size_t example, int view, int time) const override {
    check_index(example, view, time);
    return {4.0, 4.0, 8.0};
  }

  bool has_poses() const override { return with_poses_; }

  Pose3D pose(size_t example, int view, int time) const override {
    check_index(example, view, time);
    if (!with_poses_) throw StructureError("scripted: no poses");
    Pose3D p = make_pose();
    p.setZero();
    p.row(0).array() += travel(time);
    p.row(2).array() += 3000.0;
    return p;
  }

  bool has_cameras() const override { return false; }
  CameraModel camera(size_t, int) const override {
    throw StructureError("scripted: no cameras");
  }
  uint64_t content_hash() const override { return 42; }

 private:
  std::vector<ExampleInfo> examples_;
  int freeze_begin_ = 0;
  int freeze_end_ = 0;
  bool with_poses_ = true;
};

}  // namespace

TEST_CASE("whole-image crop at native size is the identity") {
  auto ds = generate_dataset({});
  Image frame = ds->full_frame(0, 1, 1);
  int w = frame.width();
  Image crop = crop_subject(frame, {w / 2.0, w / 2.0, double(w)}, w);
  REQUIRE(crop.same_shape(frame));
  for (size_t i = 0; i < frame.size(); ++i)
    CHECK(crop.data()[i] == frame.data()[i]);

  Image small = crop_subject(frame, ds->bbox(0, 1, 1), 64);
  CHECK(small.width() == 64);
  CHECK(small.height() == 64);
  for (size_t i = 0; i < small.size(); ++i) {
    CHECK(small.data()[i] >= 0.0f);
    CHECK(small.data()[i] <= 1.0f);
  }

  Image again = crop_subject(frame, ds->bbox(0, 1, 1), 64);
  for (size_t i = 0; i < small.size(); ++i)
    CHECK(small.data()[i] == again.data()[i]);

  CHECK_THROWS_AS(crop_subject(frame, {4, 4, 0.0}, 8), ArgumentError);
  CHECK_THROWS_AS(crop_subject(frame, {4, 4, 8.0}, 0), ArgumentError);
}

TEST_CASE("boxes stay centered on the figure's pixel mass") {
  auto ds = generate_dataset({});
  for (int t : {1, 50, 120}) {
    auto cov = ds->coverage_mask(0, 2, t);
    Image frame = ds->full_frame(0, 2, t);
    double sx = 0, sy = 0, sw = 0;
    for (int y = 0; y < frame.height(); ++y)
      for (int x = 0; x < frame.width(); ++x) {
        float c = cov[static_cast<size_t>(y) * frame.width() + x];
        sx += c * (x + 0.5);
        sy += c * (y + 0.5);
        sw += c;
      }
    REQUIRE(sw > 0);
    BBox box = ds->bbox(0, 2, t);
    // Joint centroid vs pixel-mass centroid: same figure, so they agree to
    // a few pixels even though limbs weigh differently.
    CHECK(std::abs(sx / sw - box.cx) < 4.0);
    CHECK(std::abs(sy / sw - box.cy) < 4.0);
    // The box covers every figure pixel.
    for (int y = 0; y < frame.height(); ++y)
      for (int x = 0; x < frame.width(); ++x)
        if (cov[static_cast<size_t>(y) * frame.width() + x] > 0.0f) {
          CHECK(std::abs(x + 0.5 - box.cx) <= box.size / 2 + 1.0);
          CHECK(std::abs(y + 0.5 - box.cy) <= box.size / 2 + 1.0);
        }
  }
}

TEST_CASE("rotation correction is rigid and recenters the root") {
  auto ds = generate_dataset({});
  CameraModel cam = ds->camera(0, 1);
  Pose3D pose = ds->pose(0, 1, 3);

  // Crop centered at the principal point: nothing to correct.
  Pose3D same = rotation_correct_pose(pose, cam, {cam.cx, cam.cy});
  CHECK((same - pose).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    Eigen::Vector2d center(rng.uniform(0.0, 96.0), rng.uniform(0.0, 96.0));
    Pose3D rot = rotation_correct_pose(pose, cam, center);
    for (int i = 0; i < kNumJoints; ++i)
      for (int j = i + 1; j < kNumJoints; ++j) {
        double before = (pose.col(i) - pose.col(j)).norm();
        double after = (rot.col(i) - rot.col(j)).norm();
        CHECK(after == doctest::Approx(before).epsilon(1e-9));
      }
  }

  // Crop center on the root's ray puts the corrected root on the axis.
  Eigen::Vector2d root_px = cam.project_camera_point(pose.col(kRootJoint));
  Pose3D centered = rotation_correct_pose(pose, cam, root_px);
  CHECK(std::abs(centered(0, kRootJoint)) < 1e-6);
  CHECK(std::abs(centered(1, kRootJoint)) < 1e-6);
  CHECK(centered.col(kRootJoint).norm() ==
        doctest::Approx(pose.col(kRootJoint).norm()).epsilon(1e-12));

  CameraModel bad = cam;
  bad.f = 0.0;
  CHECK_THROWS_AS(rotation_correct_pose(pose, bad, root_px), ArgumentError);
}

TEST_CASE("static stretches collapse to their first frame") {
  for (bool with_poses : {true, false}) {
    CAPTURE(with_poses);
    auto ds = std::make_shared<ScriptedDataset>(30, 10, 20, with_poses);
    double thr = with_poses ? 5.0 : 5.0 / 1000.0;

    auto same = filter_static(ds, 0.0);
    CHECK(same->examples()[0].times.size() == 30);

    auto filtered = filter_static(ds, thr);
    std::vector<int> expect;
    for (int t = 1; t <= 30; ++t)
      if (t <= 10 || t > 20) expect.push_back(t);
    CHECK(filtered->examples()[0].times == expect);

    CHECK_THROWS_AS(filter_static(ds, -1.0), ArgumentError);
  }
}

TEST_CASE("evaluation keeps one frame per stride") {
  auto ds = std::make_shared<ScriptedDataset>(128, 0, 0, true);
  auto all = eval_subsample(ds, 1);
  CHECK(all->examples()[0].times.size() == 128);

  auto sub = eval_subsample(ds, 64);
  CHECK(sub->examples()[0].times == std::vector<int>{1, 65});

  auto ds64 = std::make_shared<ScriptedDataset>(64, 0, 0, true);
  CHECK(eval_subsample(ds64, 64)->examples()[0].times == std::vector<int>{1});

  CHECK_THROWS_AS(eval_subsample(ds, 0), ArgumentError);

  // Views keep sharing one time set and stay fully accessible.
  for (int v : sub->examples()[0].views)
    for (int t : sub->examples()[0].times) {
      CHECK(sub->full_frame(0, v, t).width() == 8);
      CHECK(sub->pose(0, v, t)(0, 0) == ds->pose(0, v, t)(0, 0));
    }
  CHECK_THROWS_AS(sub->full_frame(0, 1, 2), StructureError);
}

TEST_CASE("subject selection narrows the example list") {
  SceneConfig cfg;
  cfg.seed = 9;
  cfg.n_subjects = 3;
  cfg.n_actions = 2;
  cfg.n_views = 2;
  cfg.n_frames = 4;
  cfg.image_size = 48;
  auto ds = generate_dataset(cfg);
  auto picked = select_subjects(ds, {"S1", "S3"});
  REQUIRE(picked->examples().size() == 4);
  for (const auto& ex : picked->examples()) CHECK(ex.subject != "S2");
  // Forwarding reaches the right base example.
  CHECK((picked->pose(2, 1, 1) - ds->pose(4, 1, 1)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((picked->camera(3, 2).R - ds->camera(5, 2).R).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(picked->content_hash() != ds->content_hash());
  CHECK_THROWS_AS(select_subjects(ds, {"S9"}), ArgumentError);
}

TEST_CASE("motion threshold calibration hits the target band") {
  SceneConfig cfg;
  cfg.seed = 31;
  cfg.n_subjects = 1;
  cfg.n_actions = 1;
  cfg.n_views = 2;
  cfg.n_frames = 400;
  cfg.image_size = 48;
  auto ds = generate_dataset(cfg);
  double tau = calibrate_motion_threshold(ds, 0.75);
  CHECK(tau > 0.0);
  auto filtered = filter_static(ds, tau);
  double retained = static_cast<double>(filtered->examples()[0].times.size()) /
                    ds->examples()[0].times.size();
  CHECK(retained >= 0.70);
  CHECK(retained <= 0.80);
}
