// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "pairs/sampler.hpp"
#include "synth/generate.hpp"

using namespace mvsync;

namespace {

SceneConfig pair_scene(int n_views, int n_frames, int image_size = 32) {
  SceneConfig cfg;
  cfg.seed = 19;
  cfg.n_subjects = 1;
  cfg.n_actions = 1;
  cfg.n_views = n_views;
  cfg.n_frames = n_frames;
  cfg.image_size = image_size;
  return cfg;
}

bool images_equal(const Image& a, const Image& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

bool same_sample(const PairSample& x, const PairSample& y) {
  auto same_ix = [](const FrameIndex& p, const FrameIndex& q) {
    return p.example == q.example && p.view == q.view && p.time == q.time;
  };
  auto same_aug = [](const AugmentParams& p, const AugmentParams& q) {
    return p.dx == q.dx && p.dy == q.dy && p.scale == q.scale &&
           p.angle == q.angle;
  };
  return same_ix(x.a, y.a) && same_ix(x.b, y.b) &&
         x.pair_class == y.pair_class && x.flipped_side == y.flipped_side &&
         x.sync_loss_defined == y.sync_loss_defined &&
         x.pre_flipped == y.pre_flipped && same_aug(x.aug_a, y.aug_a) &&
         same_aug(x.aug_b, y.aug_b);
}

}  // namespace

TEST_CASE("synchronized pairs share a time and differ in view") {
  auto ds = generate_dataset(pair_scene(4, 40));
  PairSampler sampler(ds, {}, 5);
  std::vector<int64_t> view_pair_counts(12, 0);
  for (int k = 0; k < 12000; ++k) {
    PairSample p = sampler.sample_synchronized();
    CHECK(p.a.example == p.b.example);
    CHECK(p.a.time == p.b.time);
    CHECK(p.a.view != p.b.view);
    CHECK(p.pair_class == PairClass::synchronized);
    CHECK(p.flipped_side == FlippedSide::none);
    CHECK(p.sync_loss_defined);
    int bin = (p.a.view - 1) * 3 + (p.b.view - 1) - (p.b.view > p.a.view);
    ++view_pair_counts[bin];
  }
  // Ordered view pairs are uniform: chi-squared below the 0.99 quantile.
  CHECK(oracle::chi_squared_uniform(view_pair_counts) <
        oracle::chi_squared_quantile99(11));

  auto two = generate_dataset(pair_scene(2, 40));
  PairSampler s2(two, {}, 6);
  bool saw_12 = false, saw_21 = false;
  for (int k = 0; k < 200; ++k) {
    PairSample p = s2.sample_synchronized();
    CHECK(((p.a.view == 1 && p.b.view == 2) ||
           (p.a.view == 2 && p.b.view == 1)));
    saw_12 |= p.a.view == 1;
    saw_21 |= p.a.view == 2;
  }
  CHECK(saw_12);
  CHECK(saw_21);
}

TEST_CASE("unsynchronized offsets stay strictly inside the window") {
  auto ds = generate_dataset(pair_scene(2, 200));
  SamplerConfig cfg;  // d_min = 4, d_max = 128
  PairSampler sampler(ds, cfg, 7);

  std::vector<int64_t> dt_counts(cfg.d_max - cfg.d_min - 1, 0);
  int64_t a_earlier = 0;
  const int trials = 50000;
  for (int k = 0; k < trials; ++k) {
    PairSample p = sampler.sample_unsynchronized();
    CHECK(p.a.example == p.b.example);
    CHECK(p.a.view != p.b.view);
    CHECK(p.pair_class == PairClass::unsynchronized);
    CHECK(p.sync_loss_defined);
    int dt = std::abs(p.a.time - p.b.time);
    REQUIRE(dt > cfg.d_min);
    REQUIRE(dt < cfg.d_max);
    ++dt_counts[dt - cfg.d_min - 1];
    a_earlier += p.a.time < p.b.time;
  }
  // |dt| is uniform over the admissible offsets and the sign is a coin flip.
  CHECK(oracle::chi_squared_uniform(dt_counts) <
        oracle::chi_squared_quantile99(static_cast<int>(dt_counts.size()) - 1));
  double earlier_frac = static_cast<double>(a_earlier) / trials;
  CHECK(earlier_frac >= 0.48);
  CHECK(earlier_frac <= 0.52);
}

TEST_CASE("short sequences shrink or empty the offset window") {
  auto twelve = generate_dataset(pair_scene(2, 12));
  PairSampler sampler(twelve, {}, 8);
  std::set<int> seen;
  for (int k = 0; k < 3000; ++k) {
    PairSample p = sampler.sample_unsynchronized();
    seen.insert(std::abs(p.a.time - p.b.time));
  }
  CHECK(seen == std::set<int>{5, 6, 7, 8, 9, 10, 11});

  auto five = generate_dataset(pair_scene(2, 5));
  PairSampler starved(five, {}, 9);
  CHECK_THROWS_AS(starved.sample_unsynchronized(), SamplingError);
}

TEST_CASE("flipped pairs mirror exactly one side of a synchronized pair") {
  auto ds = generate_dataset(pair_scene(2, 30, 48));
  PairSampler sampler(ds, {}, 10);
  int side_a = 0;
  const int trials = 10000;
  for (int k = 0; k < trials; ++k) {
    PairSample p = sampler.sample_flipped();
    CHECK(p.a.example == p.b.example);
    CHECK(p.a.time == p.b.time);
    CHECK(p.a.view != p.b.view);
    CHECK(p.pair_class == PairClass::flipped);
    CHECK_FALSE(p.sync_loss_defined);
    CHECK(p.flipped_side != FlippedSide::none);
    side_a += p.flipped_side == FlippedSide::a;
  }
  double frac = static_cast<double>(side_a) / trials;
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);

  // Mirroring the flipped side back recovers the synchronized pair's pixels.
  BackgroundStore store(ds, 0.08);
  Rng rng(1);
  BackgroundPolicy keep;
  for (int k = 0; k < 4; ++k) {
    PairSample flip = sampler.sample_flipped();
    PairSample plain = flip;
    plain.flipped_side = FlippedSide::none;
    plain.sync_loss_defined = true;
    auto [fa, fb] = materialize_pair(store, flip, keep, 40, rng);
    auto [pa, pb] = materialize_pair(store, plain, keep, 40, rng);
    if (flip.flipped_side == FlippedSide::a) {
      CHECK(images_equal(mirror_horizontal(fa), pa));
      CHECK(images_equal(fb, pb));
    } else {
      CHECK(images_equal(fa, pa));
      CHECK(images_equal(mirror_horizontal(fb), pb));
    }
  }
}

TEST_CASE("pre-flip augmentation mirrors both frames and nothing else") {
  auto ds = generate_dataset(pair_scene(2, 30, 48));

  SamplerConfig never;
  never.pre_flip_probability = 0.0;
  PairSampler s0(ds, never, 11);
  SamplerConfig always;
  always.pre_flip_probability = 1.0;
  PairSampler s1(ds, always, 11);
  for (int k = 0; k < 500; ++k) {
    PairSample p0 = s0.pre_flip_augment(s0.sample_synchronized());
    CHECK_FALSE(p0.pre_flipped);
    PairSample p1 = s1.pre_flip_augment(s1.sample_flipped());
    CHECK(p1.pre_flipped);
    CHECK(p1.pair_class == PairClass::flipped);  // label untouched
    CHECK_FALSE(p1.sync_loss_defined);
  }

  BackgroundStore store(ds, 0.08);
  Rng rng(2);
  BackgroundPolicy keep;
  PairSampler sampler(ds, {}, 12);
  for (int k = 0; k < 3; ++k) {
    PairSample base = sampler.sample_synchronized();
    PairSample flipped = base;
    flipped.pre_flipped = true;
    auto [ba, bb] = materialize_pair(store, base, keep, 40, rng);
    auto [fa, fb] = materialize_pair(store, flipped, keep, 40, rng);
    CHECK(images_equal(fa, mirror_horizontal(ba)));
    CHECK(images_equal(fb, mirror_horizontal(bb)));
  }
}

TEST_CASE("batches hold one pair of each class per element") {
  auto ds = generate_dataset(pair_scene(3, 150));
  SamplerConfig cfg;
  PairSampler sampler(ds, cfg, 13);
  auto batch = sampler.build_batch(16);
  REQUIRE(batch.size() == 16);
  int pre_flips = 0;
  for (const PairTriplet& t : batch) {
    CHECK(t.pos.pair_class == PairClass::synchronized);
    CHECK(t.neg.pair_class == PairClass::unsynchronized);
    CHECK(t.flip.pair_class == PairClass::flipped);
    CHECK(t.pos.a.time == t.pos.b.time);
    int dt = std::abs(t.neg.a.time - t.neg.b.time);
    CHECK(dt > cfg.d_min);
    CHECK(dt < cfg.d_max);
    CHECK(t.flip.flipped_side != FlippedSide::none);
    CHECK(t.pos.sync_loss_defined);
    CHECK(t.neg.sync_loss_defined);
    CHECK_FALSE(t.flip.sync_loss_defined);
    pre_flips += t.pos.pre_flipped + t.neg.pre_flipped + t.flip.pre_flipped;
  }
  CHECK(pre_flips > 0);   // the coin is actually being tossed
  CHECK(pre_flips < 48);

  CHECK(sampler.build_batch(1).size() == 1);
  CHECK_THROWS_AS(sampler.build_batch(0), ArgumentError);
}

TEST_CASE("single-view control pairs reuse one camera with crop jitter") {
  auto ds = generate_dataset(pair_scene(2, 60, 48));
  SamplerConfig cfg;
  cfg.single_view = true;
  PairSampler sampler(ds, cfg, 14);
  bool aug_varies = false;
  for (int k = 0; k < 2000; ++k) {
    PairSample p = sampler.sample_synchronized();
    CHECK(p.a.view == p.b.view);
    CHECK(p.a.time == p.b.time);
    for (const AugmentParams* aug : {&p.aug_a, &p.aug_b}) {
      CHECK(std::abs(aug->dx) <= cfg.aug_shift);
      CHECK(std::abs(aug->dy) <= cfg.aug_shift);
      CHECK(aug->scale >= cfg.aug_scale_lo);
      CHECK(aug->scale <= cfg.aug_scale_hi);
      CHECK(std::abs(aug->angle) <= cfg.aug_rotate);
    }
    aug_varies |= p.aug_a.dx != p.aug_b.dx;
    PairSample u = sampler.sample_unsynchronized();
    CHECK(u.a.view == u.b.view);
    CHECK(u.a.time != u.b.time);
  }
  CHECK(aug_varies);

  // With jitter switched off a synchronized control pair is the same image.
  SamplerConfig still;
  still.single_view = true;
  still.aug_shift = 0.0;
  still.aug_scale_lo = 1.0;
  still.aug_scale_hi = 1.0;
  still.aug_rotate = 0.0;
  PairSampler frozen(ds, still, 15);
  BackgroundStore store(ds, 0.08);
  Rng rng(3);
  BackgroundPolicy keep;
  PairSample p = frozen.sample_synchronized();
  auto [a, b] = materialize_pair(store, p, keep, 40, rng);
  CHECK(images_equal(a, b));
  PairSample u = frozen.sample_unsynchronized();
  auto [ua, ub] = materialize_pair(store, u, keep, 40, rng);
  CHECK_FALSE(images_equal(ua, ub));
}

TEST_CASE("equal seeds replay the pair stream, different seeds diverge") {
  auto ds = generate_dataset(pair_scene(3, 80));
  SamplerConfig cfg;
  PairSampler x(ds, cfg, 21);
  PairSampler y(ds, cfg, 21);
  PairSampler z(ds, cfg, 22);
  bool z_differs = false;
  for (int k = 0; k < 300; ++k) {
    auto bx = x.build_batch(2);
    auto by = y.build_batch(2);
    auto bz = z.build_batch(2);
    for (size_t j = 0; j < bx.size(); ++j) {
      CHECK(same_sample(bx[j].pos, by[j].pos));
      CHECK(same_sample(bx[j].neg, by[j].neg));
      CHECK(same_sample(bx[j].flip, by[j].flip));
      z_differs |= !same_sample(bx[j].neg, bz[j].neg);
    }
  }
  CHECK(z_differs);
}

TEST_CASE("bad sampler settings are rejected up front") {
  auto ds = generate_dataset(pair_scene(2, 40));
  SamplerConfig bad;
  bad.d_min = 10;
  bad.d_max = 10;
  CHECK_THROWS_AS(PairSampler(ds, bad, 1), ConfigError);

  SamplerConfig prob;
  prob.pre_flip_probability = 1.5;
  CHECK_THROWS_AS(PairSampler(ds, prob, 1), ConfigError);

  SamplerConfig scale;
  scale.aug_scale_lo = -0.5;
  CHECK_THROWS_AS(PairSampler(ds, scale, 1), ConfigError);
}
