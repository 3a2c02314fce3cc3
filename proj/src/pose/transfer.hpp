// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "core/image.hpp"
#include "core/pose.hpp"
#include "nn/encoder.hpp"

namespace mvsync {

// Per-joint, per-coordinate affine normalization of regression targets,
// fitted on the training split.
struct PoseNormalizer {
  Pose3D mean = Pose3D::Zero(3, kNumJoints);
  Pose3D stddev = Pose3D::Ones(3, kNumJoints);

  // Flattened joint-major order (j0x, j0y, j0z, j1x, ...).
  std::vector<double> normalize(const Pose3D& p) const {
    std::vector<double> out(3 * kNumJoints);
    for (int j = 0; j < kNumJoints; ++j)
      for (int i = 0; i < 3; ++i)
        out[3 * j + i] = (p(i, j) - mean(i, j)) / stddev(i, j);
    return out;
  }

  Pose3D denormalize(const std::vector<double>& v) const {
    Pose3D p = make_pose();
    for (int j = 0; j < kNumJoints; ++j)
      for (int i = 0; i < 3; ++i)
        p(i, j) = v[3 * j + i] * stddev(i, j) + mean(i, j);
    return p;
  }
};

// Elementwise mean and standard deviation over the training poses; the
// deviation is floored so constant coordinates stay invertible.
PoseNormalizer fit_normalizer(const std::vector<Pose3D>& poses);

// Mirror the frame and reflect the pose about x = 0 with left/right joint
// relabeling, keeping image and target consistent.
std::pair<Image, Pose3D> flip_pose_pair(const Image& frame, const Pose3D& pose);

// Encoder with a single linear head regressing the normalized pose vector.
template <typename T>
class PoseModel {
 public:
  explicit PoseModel(const EncoderConfig& enc_cfg)
      : encoder(enc_cfg), head("head_pose", enc_cfg.embed_dim(), 3 * kNumJoints) {}

  void init(Rng& rng) { encoder.init(rng); }  // head stays zero

  // Mean over the batch of squared norms over all 51 coordinates, plus
  // gradient accumulation. targets: one normalized vector per image.
  double train_step(const Act<T>& images,
                    const std::vector<std::vector<double>>& targets) {
    if (static_cast<int>(targets.size()) != images.B)
      throw ArgumentError("pose train_step: target count mismatch");
    Act<T> emb = encoder.forward(images, true);
    Act<T> pred = head.forward(emb, true);
    int B = images.B, K = 3 * kNumJoints;
    Act<T> dpred(K, B, 1, 1);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      for (int k = 0; k < K; ++k) {
        double d = pred.row(k)[b] - targets[b][k];
        loss += d * d;
        dpred.row(k)[b] = static_cast<T>(2.0 * d / B);
      }
    }
    loss /= B;
    if (!std::isfinite(loss))
      throw NumericError("pose train_step: non-finite loss");
    Act<T> demb = head.backward(dpred);
    encoder.backward(demb, B);
    return loss;
  }

  // Denormalized poses with the root fixed at the origin.
  std::vector<Pose3D> predict(const Act<T>& images,
                              const PoseNormalizer& normalizer) {
    Act<T> emb = encoder.forward(images, false);
    Act<T> pred = head.forward(emb, false);
    int K = 3 * kNumJoints;
    std::vector<Pose3D> out;
    out.reserve(images.B);
    std::vector<double> v(K);
    for (int b = 0; b < images.B; ++b) {
      for (int k = 0; k < K; ++k) v[k] = pred.row(k)[b];
      Pose3D p = normalizer.denormalize(v);
      p.col(kRootJoint).setZero();
      out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<Param<T>*> params(bool trainable_only = false) {
    auto out = encoder.params(trainable_only);
    out.push_back(&head.weight);
    out.push_back(&head.bias);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  StateDict<T> state() {
    StateDict<T> out = encoder.state();
    out.push_back({head.weight.name, &head.weight.w});
    out.push_back({head.bias.name, &head.bias.w});
    return out;
  }

  Encoder<T> encoder;
  Linear<T> head;
};

}  // namespace mvsync
