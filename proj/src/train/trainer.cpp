// SPDX-License-Identifier: Apache-2.0
#include "train/trainer.hpp"

#include <algorithm>
#include <cstring>

#include "data/ops.hpp"

namespace mvsync {

void pack_image(const Image& img, Act<float>& batch, int b) {
  if (img.width() != batch.W || img.height() != batch.H)
    throw ArgumentError("pack_image: shape mismatch");
  if (b < 0 || b >= batch.B) throw ArgumentError("pack_image: bad slot");
  size_t px = img.pixels();
  for (int c = 0; c < 3; ++c)
    std::memcpy(batch.row(c) + static_cast<size_t>(b) * px, img.plane(c),
                px * sizeof(float));
}

void SSLTrainConfig::validate() const {
  sampler.validate();
  if (crop_size < 8) throw ConfigError("ssl: crop_size must be >= 8");
  if (batch_size < 1) throw ConfigError("ssl: batch_size must be >= 1");
  if (total_steps < 1) throw ConfigError("ssl: total_steps must be >= 1");
  if (!(lr0 > 0.0) || !(lr_min > 0.0) || lr_min > lr0)
    throw ConfigError("ssl: need 0 < lr_min <= lr0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("ssl: tau must be in (0,1]");
  if (!(policy.mixed_ratio >= 0.0 && policy.mixed_ratio <= 1.0))
    throw ConfigError("ssl: mixed_ratio must be in [0,1]");
}

SSLTrainer::SSLTrainer(DatasetPtr ds, const SSLTrainConfig& cfg)
    : ds_(std::move(ds)),
      cfg_(cfg),
      store_(ds_, cfg_.tau),
      sampler_(ds_, cfg_.sampler, cfg_.seed),
      policy_rng_(Rng::substream(cfg_.seed, 0x706f6c6963ULL)),
      model_(cfg_.encoder, cfg_.fusion, cfg_.concat_relu),
      opt_(0.9, 0.999, 1e-8, cfg_.weight_decay) {
  cfg_.validate();
  Rng init_rng = Rng::substream(cfg_.seed, 0x696e6974ULL);
  model_.init(init_rng);
}

StepLog SSLTrainer::step() {
  auto batch = sampler_.build_batch(cfg_.batch_size);
  Act<float> images(3, 6 * cfg_.batch_size, cfg_.crop_size, cfg_.crop_size);
  for (int j = 0; j < cfg_.batch_size; ++j) {
    const PairTriplet& t = batch[j];
    const PairSample* pairs[3] = {&t.pos, &t.neg, &t.flip};
    for (int k = 0; k < 3; ++k) {
      auto [a, b] = materialize_pair(store_, *pairs[k], cfg_.policy,
                                     cfg_.crop_size, policy_rng_,
                                     cfg_.background_only);
      pack_image(a, images, 6 * j + 2 * k);
      pack_image(b, images, 6 * j + 2 * k + 1);
    }
  }
  model_.zero_grad();
  SSLStats st = model_.train_step(images, cfg_.batch_size, cfg_.signal);
  double lr = cosine_lr(step_, cfg_.total_steps, cfg_.lr0, cfg_.lr_min);
  opt_.step(model_.params(true), lr);
  ++step_;
  return {step_, lr, st.loss, st.acc_sync, st.acc_flip};
}

Checkpoint SSLTrainer::checkpoint(uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::ssl;
  ckpt.step = static_cast<uint64_t>(step_);
  ckpt.config_hash = config_hash;
  ckpt.dataset_hash = ds_->content_hash();
  ckpt.rng_state = sampler_.rng().save_state() + "\n" + policy_rng_.save_state();
  pack_state(ckpt, model_.state());
  pack_state(ckpt, opt_.state(model_.params(true)));
  return ckpt;
}

namespace {

std::pair<std::string, std::string> split_rng_state(const std::string& s) {
  size_t cut = s.find('\n');
  if (cut == std::string::npos)
    throw StructureError("checkpoint: malformed sampler state");
  return {s.substr(0, cut), s.substr(cut + 1)};
}

}  // namespace

void SSLTrainer::restore(const Checkpoint& ckpt, uint64_t config_hash,
                         bool check_dataset) {
  if (ckpt.kind != CheckpointKind::ssl)
    throw StructureError("checkpoint holds a different model kind");
  if (ckpt.config_hash != config_hash)
    throw ConfigError("checkpoint was written under a different configuration");
  if (check_dataset && ckpt.dataset_hash != ds_->content_hash())
    throw ConfigError("checkpoint belongs to a different dataset");
  unpack_state(ckpt, model_.state());
  unpack_state(ckpt, opt_.state(model_.params(true)));
  opt_.sync_step_from_state();
  step_ = static_cast<int64_t>(ckpt.step);
  auto [s1, s2] = split_rng_state(ckpt.rng_state);
  sampler_.rng().load_state(s1);
  policy_rng_.load_state(s2);
}

double sync_accuracy(SSLModel<float>& model, DatasetPtr ds,
                     const BackgroundStore& store,
                     const BackgroundPolicy& policy, int crop_size, int dt_lo,
                     int dt_hi, int n, uint64_t seed, bool background_only) {
  if (n < 1) throw ArgumentError("sync_accuracy: n must be >= 1");
  if (dt_lo < 1 || dt_lo > dt_hi)
    throw ArgumentError("sync_accuracy: bad offset bucket");
  SamplerConfig scfg;
  scfg.d_min = dt_lo - 1;
  scfg.d_max = dt_hi + 1;
  PairSampler sampler(ds, scfg, mix64(seed ^ 0x657661ULL));
  Rng policy_rng = Rng::substream(seed, 0x6576706fULL);

  int correct = 0;
  const int chunk = 16;
  for (int done = 0; done < n; done += chunk) {
    int take = std::min(chunk, n - done);
    std::vector<PairSample> pairs;
    pairs.reserve(2 * take);
    for (int k = 0; k < take; ++k) {
      pairs.push_back(sampler.sample_synchronized());
      pairs.push_back(sampler.sample_unsynchronized());
    }
    Act<float> images(3, 2 * static_cast<int>(pairs.size()), crop_size,
                      crop_size);
    for (size_t p = 0; p < pairs.size(); ++p) {
      auto [a, b] = materialize_pair(store, pairs[p], policy, crop_size,
                                     policy_rng, background_only);
      pack_image(a, images, 2 * static_cast<int>(p));
      pack_image(b, images, 2 * static_cast<int>(p) + 1);
    }
    auto scores = model.predict_pairs(images);
    for (size_t p = 0; p < pairs.size(); ++p) {
      bool said_sync = scores[p].p_sync > 0.5;
      bool is_sync = pairs[p].pair_class == PairClass::synchronized;
      correct += said_sync == is_sync;
    }
  }
  return static_cast<double>(correct) / (2.0 * n);
}

double flip_accuracy(SSLModel<float>& model, DatasetPtr ds,
                     const BackgroundStore& store,
                     const BackgroundPolicy& policy, int crop_size, int n,
                     uint64_t seed, bool background_only) {
  if (n < 1) throw ArgumentError("flip_accuracy: n must be >= 1");
  SamplerConfig scfg;
  PairSampler sampler(ds, scfg, mix64(seed ^ 0x666c6970ULL));
  Rng policy_rng = Rng::substream(seed, 0x666c7270ULL);

  int correct = 0;
  const int chunk = 16;
  for (int done = 0; done < n; done += chunk) {
    int take = std::min(chunk, n - done);
    std::vector<PairSample> pairs;
    pairs.reserve(2 * take);
    for (int k = 0; k < take; ++k) {
      pairs.push_back(sampler.sample_synchronized());
      pairs.push_back(sampler.sample_flipped());
    }
    Act<float> images(3, 2 * static_cast<int>(pairs.size()), crop_size,
                      crop_size);
    for (size_t p = 0; p < pairs.size(); ++p) {
      auto [a, b] = materialize_pair(store, pairs[p], policy, crop_size,
                                     policy_rng, background_only);
      pack_image(a, images, 2 * static_cast<int>(p));
      pack_image(b, images, 2 * static_cast<int>(p) + 1);
    }
    auto scores = model.predict_pairs(images);
    for (size_t p = 0; p < pairs.size(); ++p) {
      bool said_plain = scores[p].p_noflip > 0.5;
      bool is_plain = pairs[p].pair_class == PairClass::synchronized;
      correct += said_plain == is_plain;
    }
  }
  return static_cast<double>(correct) / (2.0 * n);
}

double retrieval_recall(SSLModel<float>& model, DatasetPtr ds,
                        const BackgroundStore& store, int crop_size, int n,
                        int top_k, uint64_t seed) {
  if (n < 1 || top_k < 1) throw ArgumentError("retrieval: bad counts");
  const auto& ex = ds->examples().at(0);
  if (ex.views.size() < 2)
    throw SamplingError("retrieval needs two views");
  int vq = ex.views[0], vg = ex.views[1];
  (void)store;

  auto embed_all = [&](int view) {
    const auto& times = ex.times;
    int D = model.encoder.embed_dim();
    std::vector<std::vector<float>> out(times.size());
    const int chunk = 32;
    for (size_t at = 0; at < times.size(); at += chunk) {
      int take = static_cast<int>(std::min<size_t>(chunk, times.size() - at));
      Act<float> images(3, take, crop_size, crop_size);
      for (int k = 0; k < take; ++k) {
        FrameIndex ix{0, view, times[at + k]};
        pack_image(crop_subject(ds->full_frame(ix), ds->bbox(ix), crop_size),
                   images, k);
      }
      Act<float> emb = model.encode(images);
      for (int k = 0; k < take; ++k) {
        std::vector<float> e(D);
        for (int d = 0; d < D; ++d) e[d] = emb.row(d)[k];
        double norm = 0.0;
        for (float x : e) norm += double(x) * x;
        norm = std::sqrt(std::max(norm, 1e-30));
        for (float& x : e) x = static_cast<float>(x / norm);
        out[at + k] = std::move(e);
      }
    }
    return out;
  };

  auto queries = embed_all(vq);
  auto gallery = embed_all(vg);
  Rng rng = Rng::substream(seed, 0x72657472ULL);
  int hits = 0;
  for (int k = 0; k < n; ++k) {
    size_t qi = static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(queries.size()) - 1));
    double own = 0.0;
    int better = 0;
    for (size_t d = 0; d < queries[qi].size(); ++d)
      own += double(queries[qi][d]) * gallery[qi][d];
    for (size_t g = 0; g < gallery.size(); ++g) {
      if (g == qi) continue;
      double s = 0.0;
      for (size_t d = 0; d < queries[qi].size(); ++d)
        s += double(queries[qi][d]) * gallery[g][d];
      better += s > own;
    }
    hits += better < top_k;
  }
  return static_cast<double>(hits) / n;
}

void PoseTrainConfig::validate() const {
  if (frozen_blocks < 0 || frozen_blocks > encoder.num_blocks())
    throw ConfigError("pose: frozen_blocks out of range");
  if (crop_size < 8) throw ConfigError("pose: crop_size must be >= 8");
  if (batch_size < 1) throw ConfigError("pose: batch_size must be >= 1");
  if (total_steps < 1) throw ConfigError("pose: total_steps must be >= 1");
  if (!(lr0 > 0.0) || !(lr_min > 0.0) || lr_min > lr0)
    throw ConfigError("pose: need 0 < lr_min <= lr0");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
    throw ConfigError("pose: flip_probability must be in [0,1]");
  if (background != BackgroundMode::keep && background != BackgroundMode::remove)
    throw ConfigError("pose: background must be keep or remove");
  if (!(tau > 0.0)) throw ConfigError("pose: tau must be positive");
}

Pose3D regression_target(const MultiViewDataset& ds, size_t example, int view,
                         int time) {
  Pose3D pose = ds.pose(example, view, time);
  BBox box = ds.bbox(example, view, time);
  CameraModel cam = ds.camera(example, view);
  Pose3D corrected =
      rotation_correct_pose(pose, cam, Eigen::Vector2d(box.cx, box.cy));
  Eigen::Vector3d root = corrected.col(kRootJoint);
  corrected.colwise() -= root;
  return corrected;
}

PoseTrainer::PoseTrainer(DatasetPtr ds, const PoseTrainConfig& cfg)
    : ds_(std::move(ds)),
      cfg_(cfg),
      rng_(Rng::substream(cfg_.seed, 0x706f7365ULL)),
      model_(cfg_.encoder),
      opt_(0.9, 0.999, 1e-8, cfg_.weight_decay) {
  cfg_.validate();
  if (!ds_->has_poses() || !ds_->has_cameras())
    throw StructureError("pose training needs poses and cameras");
  for (size_t e = 0; e < ds_->examples().size(); ++e) {
    const auto& ex = ds_->examples()[e];
    for (int v : ex.views)
      for (int t : ex.times) frames_.push_back({e, v, t});
  }
  if (frames_.empty()) throw SamplingError("pose training: empty dataset");
  if (cfg_.background == BackgroundMode::remove)
    store_ = std::make_unique<BackgroundStore>(ds_, cfg_.tau);

  std::vector<Pose3D> targets;
  targets.reserve(frames_.size());
  for (const FrameIndex& ix : frames_)
    targets.push_back(regression_target(*ds_, ix.example, ix.view, ix.time));
  normalizer_ = fit_normalizer(targets);

  Rng init_rng = Rng::substream(cfg_.seed, 0x696e6974ULL);
  model_.init(init_rng);
  model_.encoder.set_frozen_blocks(cfg_.frozen_blocks);
}

Image PoseTrainer::input_frame(const FrameIndex& ix) const {
  Image full = ds_->full_frame(ix);
  if (store_) full = remove_background(full, store_->model(ix.example, ix.view));
  return crop_subject(full, ds_->bbox(ix), cfg_.crop_size);
}

void PoseTrainer::load_encoder(const Checkpoint& ckpt) {
  unpack_state(ckpt, model_.encoder.state());
}

double PoseTrainer::step() {
  int B = cfg_.batch_size;
  Act<float> images(3, B, cfg_.crop_size, cfg_.crop_size);
  std::vector<std::vector<double>> targets(B);
  for (int b = 0; b < B; ++b) {
    const FrameIndex& ix = frames_[static_cast<size_t>(
        rng_.uniform_int(0, static_cast<int64_t>(frames_.size()) - 1))];
    Image crop = input_frame(ix);
    Pose3D target = regression_target(*ds_, ix.example, ix.view, ix.time);
    if (rng_.uniform() < cfg_.flip_probability) {
      auto flipped = flip_pose_pair(crop, target);
      crop = std::move(flipped.first);
      target = std::move(flipped.second);
    }
    pack_image(crop, images, b);
    targets[b] = normalizer_.normalize(target);
  }
  model_.zero_grad();
  double loss = model_.train_step(images, targets);
  double lr = cosine_lr(step_, cfg_.total_steps, cfg_.lr0, cfg_.lr_min);
  opt_.step(model_.params(true), lr);
  ++step_;
  return loss;
}

std::vector<float> split_doubles(const std::vector<double>& v) {
  std::vector<float> out(2 * v.size());
  std::memcpy(out.data(), v.data(), v.size() * sizeof(double));
  return out;
}

std::vector<double> join_doubles(const std::vector<float>& v) {
  if (v.size() % 2 != 0)
    throw StructureError("checkpoint: odd split-double tensor");
  std::vector<double> out(v.size() / 2);
  std::memcpy(out.data(), v.data(), out.size() * sizeof(double));
  return out;
}

std::vector<double> flatten_pose(const Pose3D& p) {
  std::vector<double> out(3 * kNumJoints);
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i) out[3 * j + i] = p(i, j);
  return out;
}

Pose3D unflatten_pose(const std::vector<double>& v) {
  if (v.size() != 3 * kNumJoints)
    throw StructureError("checkpoint: bad pose tensor length");
  Pose3D p = make_pose();
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i) p(i, j) = v[3 * j + i];
  return p;
}

Checkpoint PoseTrainer::checkpoint(uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.kind = CheckpointKind::pose;
  ckpt.step = static_cast<uint64_t>(step_);
  ckpt.config_hash = config_hash;
  ckpt.dataset_hash = ds_->content_hash();
  ckpt.rng_state = rng_.save_state();
  pack_state(ckpt, model_.state());
  pack_state(ckpt, opt_.state(model_.params(true)));
  ckpt.tensors.push_back(
      {"normalizer.mean", split_doubles(flatten_pose(normalizer_.mean))});
  ckpt.tensors.push_back(
      {"normalizer.stddev", split_doubles(flatten_pose(normalizer_.stddev))});
  return ckpt;
}

void PoseTrainer::restore(const Checkpoint& ckpt, uint64_t config_hash,
                          bool check_dataset) {
  if (ckpt.kind != CheckpointKind::pose)
    throw StructureError("checkpoint holds a different model kind");
  if (ckpt.config_hash != config_hash)
    throw ConfigError("checkpoint was written under a different configuration");
  if (check_dataset && ckpt.dataset_hash != ds_->content_hash())
    throw ConfigError("checkpoint belongs to a different dataset");
  unpack_state(ckpt, model_.state());
  unpack_state(ckpt, opt_.state(model_.params(true)));
  opt_.sync_step_from_state();
  step_ = static_cast<int64_t>(ckpt.step);
  rng_.load_state(ckpt.rng_state);
  const auto* mean = ckpt.find("normalizer.mean");
  const auto* stddev = ckpt.find("normalizer.stddev");
  if (!mean || !stddev)
    throw StructureError("checkpoint: missing normalizer tensors");
  normalizer_.mean = unflatten_pose(join_doubles(*mean));
  normalizer_.stddev = unflatten_pose(join_doubles(*stddev));
}

MetricReport evaluate_pose(PoseModel<float>& model,
                           const PoseNormalizer& normalizer, DatasetPtr ds,
                           int crop_size, int batch, BackgroundMode background,
                           const BackgroundStore* store) {
  if (batch < 1) throw ArgumentError("evaluate_pose: batch must be >= 1");
  if (background != BackgroundMode::keep &&
      background != BackgroundMode::remove)
    throw ArgumentError("evaluate_pose: background must be keep or remove");
  if (background == BackgroundMode::remove && store == nullptr)
    throw ArgumentError("evaluate_pose: removal needs a background store");
  std::vector<FrameIndex> frames;
  for (size_t e = 0; e < ds->examples().size(); ++e) {
    const auto& ex = ds->examples()[e];
    for (int v : ex.views)
      for (int t : ex.times) frames.push_back({e, v, t});
  }
  if (frames.empty()) throw ArgumentError("evaluate_pose: empty dataset");

  MetricReport report;
  for (size_t at = 0; at < frames.size(); at += batch) {
    int take = static_cast<int>(
        std::min<size_t>(batch, frames.size() - at));
    Act<float> images(3, take, crop_size, crop_size);
    for (int k = 0; k < take; ++k) {
      const FrameIndex& ix = frames[at + k];
      Image full = ds->full_frame(ix);
      if (background == BackgroundMode::remove)
        full = remove_background(full, store->model(ix.example, ix.view));
      pack_image(crop_subject(full, ds->bbox(ix), crop_size), images, k);
    }
    auto preds = model.predict(images, normalizer);
    for (int k = 0; k < take; ++k) {
      const FrameIndex& ix = frames[at + k];
      Pose3D gt = regression_target(*ds, ix.example, ix.view, ix.time);
      report.mpjpe_mm += mpjpe(preds[k], gt);
      report.nmpjpe_mm += nmpjpe(preds[k], gt);
      report.pmpjpe_mm += pmpjpe(preds[k], gt);
    }
  }
  double n = static_cast<double>(frames.size());
  report.mpjpe_mm /= n;
  report.nmpjpe_mm /= n;
  report.pmpjpe_mm /= n;
  report.n_samples = static_cast<int64_t>(frames.size());
  report.correction = joint_correction(kNumJoints);
  return report;
}

}  // namespace mvsync
