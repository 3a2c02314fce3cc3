// SPDX-License-Identifier: Apache-2.0
#include "pairs/sampler.hpp"

#include <algorithm>

#include "data/ops.hpp"

namespace mvsync {

void SamplerConfig::validate() const {
  if (d_min < 0 || d_min >= d_max)
    throw ConfigError("sampler: need 0 <= d_min < d_max");
  if (!(pre_flip_probability >= 0.0 && pre_flip_probability <= 1.0))
    throw ConfigError("sampler: pre_flip_probability must be in [0,1]");
  if (!(aug_scale_lo > 0.0 && aug_scale_lo <= aug_scale_hi))
    throw ConfigError("sampler: bad augmentation scale range");
  if (aug_shift < 0.0 || aug_rotate < 0.0)
    throw ConfigError("sampler: augmentation ranges must be >= 0");
}

PairSampler::PairSampler(DatasetPtr ds, const SamplerConfig& cfg, uint64_t seed)
    : ds_(std::move(ds)), cfg_(cfg), rng_(Rng::substream(seed, 0x70616972ULL)) {
  cfg_.validate();
  const auto& exs = ds_->examples();
  if (exs.empty()) throw SamplingError("sampler: empty dataset");
  offsets_.resize(exs.size());
  for (size_t e = 0; e < exs.size(); ++e) {
    const auto& times = exs[e].times;
    if (!cfg_.single_view && exs[e].views.size() < 2)
      throw SamplingError("sampler: example (" + exs[e].subject + ", " +
                          exs[e].action + ") has fewer than 2 views");
    OffsetTable& tab = offsets_[e];
    for (int dt = cfg_.d_min + 1; dt < cfg_.d_max; ++dt) {
      std::vector<int> starts;
      for (int t : times)
        if (std::binary_search(times.begin(), times.end(), t + dt))
          starts.push_back(t);
      if (!starts.empty()) {
        tab.offsets.push_back(dt);
        tab.starts.push_back(std::move(starts));
      }
    }
    if (!tab.offsets.empty()) unsync_examples_.push_back(e);
  }
}

size_t PairSampler::pick_example() {
  return static_cast<size_t>(
      rng_.uniform_int(0, static_cast<int64_t>(ds_->examples().size()) - 1));
}

void PairSampler::pick_views(size_t example, int& va, int& vb) {
  const auto& views = ds_->examples()[example].views;
  if (cfg_.single_view) {
    va = vb = views[rng_.uniform_int(0, static_cast<int64_t>(views.size()) - 1)];
    return;
  }
  // Uniform over ordered distinct pairs.
  size_t ia = rng_.uniform_int(0, static_cast<int64_t>(views.size()) - 1);
  size_t ib = rng_.uniform_int(0, static_cast<int64_t>(views.size()) - 2);
  if (ib >= ia) ++ib;
  va = views[ia];
  vb = views[ib];
}

int PairSampler::pick_time(size_t example) {
  const auto& times = ds_->examples()[example].times;
  return times[rng_.uniform_int(0, static_cast<int64_t>(times.size()) - 1)];
}

AugmentParams PairSampler::pick_augment() {
  AugmentParams aug;
  if (!cfg_.single_view) return aug;
  aug.dx = rng_.uniform(-cfg_.aug_shift, cfg_.aug_shift);
  aug.dy = rng_.uniform(-cfg_.aug_shift, cfg_.aug_shift);
  aug.scale = rng_.uniform(cfg_.aug_scale_lo, cfg_.aug_scale_hi);
  aug.angle = rng_.uniform(-cfg_.aug_rotate, cfg_.aug_rotate);
  return aug;
}

PairSample PairSampler::synchronized_base() {
  PairSample p;
  size_t e = pick_example();
  int t = pick_time(e);
  int va, vb;
  pick_views(e, va, vb);
  p.a = {e, va, t};
  p.b = {e, vb, t};
  p.aug_a = pick_augment();
  p.aug_b = pick_augment();
  return p;
}

PairSample PairSampler::sample_synchronized() {
  PairSample p = synchronized_base();
  p.pair_class = PairClass::synchronized;
  return p;
}

PairSample PairSampler::sample_unsynchronized() {
  if (unsync_examples_.empty())
    throw SamplingError("sampler: no admissible unsynchronized offset; "
                        "sequences are too short for the (d_min, d_max) window");
  PairSample p;
  size_t e = unsync_examples_[rng_.uniform_int(
      0, static_cast<int64_t>(unsync_examples_.size()) - 1)];
  const OffsetTable& tab = offsets_[e];
  size_t oi =
      rng_.uniform_int(0, static_cast<int64_t>(tab.offsets.size()) - 1);
  const auto& starts = tab.starts[oi];
  int t1 = starts[rng_.uniform_int(0, static_cast<int64_t>(starts.size()) - 1)];
  int t2 = t1 + tab.offsets[oi];
  if (rng_.bernoulli(0.5)) std::swap(t1, t2);  // sign of dt
  int va, vb;
  pick_views(e, va, vb);
  p.a = {e, va, t1};
  p.b = {e, vb, t2};
  p.pair_class = PairClass::unsynchronized;
  p.aug_a = pick_augment();
  p.aug_b = pick_augment();
  return p;
}

PairSample PairSampler::sample_flipped() {
  PairSample p = synchronized_base();
  p.pair_class = PairClass::flipped;
  p.flipped_side = rng_.bernoulli(0.5) ? FlippedSide::a : FlippedSide::b;
  p.sync_loss_defined = false;
  return p;
}

PairSample PairSampler::pre_flip_augment(PairSample pair) {
  pair.pre_flipped = rng_.uniform() < cfg_.pre_flip_probability;
  return pair;
}

std::vector<PairTriplet> PairSampler::build_batch(int batch_size) {
  if (batch_size < 1) throw ArgumentError("sampler: batch_size must be >= 1");
  std::vector<PairTriplet> batch;
  batch.reserve(batch_size);
  for (int j = 0; j < batch_size; ++j) {
    PairTriplet t;
    t.pos = pre_flip_augment(sample_synchronized());
    t.neg = pre_flip_augment(sample_unsynchronized());
    t.flip = pre_flip_augment(sample_flipped());
    batch.push_back(std::move(t));
  }
  return batch;
}

std::pair<Image, Image> materialize_pair(const BackgroundStore& store,
                                         const PairSample& pair,
                                         const BackgroundPolicy& policy,
                                         int out_size, Rng& rng,
                                         bool background_only) {
  PairFrames frames = store.apply_policy(pair.a, pair.b, policy, rng);
  if (background_only) {
    frames.a =
        remove_foreground(frames.a, store.model(pair.a.example, pair.a.view));
    frames.b =
        remove_foreground(frames.b, store.model(pair.b.example, pair.b.view));
  }
  const MultiViewDataset& ds = store.dataset();

  auto crop = [&](const Image& full, const FrameIndex& ix,
                  const AugmentParams& aug) {
    BBox box = ds.bbox(ix);
    box.cx += aug.dx * box.size;
    box.cy += aug.dy * box.size;
    box.size *= aug.scale;
    if (aug.angle == 0.0) return crop_subject(full, box, out_size);
    return sample_patch(full, box.cx, box.cy, box.size, out_size, aug.angle);
  };
  Image a = crop(frames.a, pair.a, pair.aug_a);
  Image b = crop(frames.b, pair.b, pair.aug_b);

  if (pair.pre_flipped) {
    a = mirror_horizontal(a);
    b = mirror_horizontal(b);
  }
  if (pair.flipped_side == FlippedSide::a) a = mirror_horizontal(a);
  if (pair.flipped_side == FlippedSide::b) b = mirror_horizontal(b);
  return {std::move(a), std::move(b)};
}

}  // namespace mvsync
