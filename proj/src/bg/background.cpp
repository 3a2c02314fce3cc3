// SPDX-License-Identifier: Apache-2.0
#include "bg/background.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "core/strutil.hpp"

namespace mvsync {

BackgroundMode parse_background_mode(const std::string& name) {
  if (name == "keep") return BackgroundMode::keep;
  if (name == "remove") return BackgroundMode::remove;
  if (name == "substitute") return BackgroundMode::substitute;
  if (name == "mixed") return BackgroundMode::mixed;
  throw ConfigError("unknown background mode '" + name + "'");
}

const char* background_mode_name(BackgroundMode mode) {
  switch (mode) {
    case BackgroundMode::keep: return "keep";
    case BackgroundMode::remove: return "remove";
    case BackgroundMode::substitute: return "substitute";
    case BackgroundMode::mixed: return "mixed";
  }
  return "?";
}

BackgroundModel compute_median_background(const std::vector<Image>& frames,
                                          double tau) {
  if (frames.size() < 3)
    throw ArgumentError("median background needs at least 3 frames");
  if (!(tau > 0.0 && tau <= 1.0))
    throw ArgumentError("background threshold must be in (0, 1]");
  for (const Image& f : frames)
    if (!f.same_shape(frames.front()))
      throw ArgumentError("median background: frame shapes differ");

  BackgroundModel bg;
  bg.tau = tau;
  bg.median = Image(frames.front().width(), frames.front().height());
  size_t n = frames.size();
  std::vector<double> stack(n);
  for (size_t i = 0; i < bg.median.size(); ++i) {
    for (size_t k = 0; k < n; ++k) stack[k] = frames[k].data()[i];
    auto mid = stack.begin() + n / 2;
    std::nth_element(stack.begin(), mid, stack.end());
    double med = *mid;
    if (n % 2 == 0) {
      std::nth_element(stack.begin(), mid - 1, mid);
      med = 0.5 * (med + *(mid - 1));
    }
    bg.median.data()[i] = static_cast<float>(med);
  }
  return bg;
}

std::vector<uint8_t> foreground_mask(const Image& frame,
                                     const BackgroundModel& bg) {
  if (!frame.same_shape(bg.median))
    throw ArgumentError("background: frame/median shape mismatch");
  std::vector<uint8_t> mask(frame.pixels(), 0);
  const float* f0 = frame.plane(0);
  const float* f1 = frame.plane(1);
  const float* f2 = frame.plane(2);
  const float* m0 = bg.median.plane(0);
  const float* m1 = bg.median.plane(1);
  const float* m2 = bg.median.plane(2);
  for (size_t i = 0; i < mask.size(); ++i) {
    double d = std::max({std::abs(double(f0[i]) - m0[i]),
                         std::abs(double(f1[i]) - m1[i]),
                         std::abs(double(f2[i]) - m2[i])});
    mask[i] = d > bg.tau ? 1 : 0;
  }
  return mask;
}

namespace {

Image masked_select(const Image& frame, const std::vector<uint8_t>& mask,
                    bool keep_foreground, const Image* fill) {
  Image out(frame.width(), frame.height());
  for (int c = 0; c < 3; ++c) {
    const float* src = frame.plane(c);
    const float* bgp = fill ? fill->plane(c) : nullptr;
    float* dst = out.plane(c);
    for (size_t i = 0; i < frame.pixels(); ++i) {
      bool fg = mask[i] != 0;
      if (fg == keep_foreground)
        dst[i] = src[i];
      else
        dst[i] = bgp ? bgp[i] : 0.0f;
    }
  }
  return out;
}

}  // namespace

Image remove_background(const Image& frame, const BackgroundModel& bg) {
  return masked_select(frame, foreground_mask(frame, bg), true, nullptr);
}

Image remove_foreground(const Image& frame, const BackgroundModel& bg) {
  return masked_select(frame, foreground_mask(frame, bg), false, nullptr);
}

Image substitute_background(const Image& frame, const BackgroundModel& own,
                            const BackgroundModel& other) {
  if (!frame.same_shape(other.median))
    throw ArgumentError("background: substitute median shape mismatch");
  return masked_select(frame, foreground_mask(frame, own), true, &other.median);
}

BackgroundStore::BackgroundStore(DatasetPtr ds, double tau,
                                 int max_median_frames)
    : ds_(std::move(ds)), tau_(tau), max_frames_(max_median_frames) {
  if (max_frames_ < 3)
    throw ArgumentError("background store: need at least 3 median frames");
}

const BackgroundModel& BackgroundStore::model(size_t example, int view) const {
  auto key = std::make_pair(example, view);
  auto it = models_.find(key);
  if (it != models_.end()) return it->second;

  const auto& times = ds_->examples().at(example).times;
  std::vector<Image> frames;
  size_t n = times.size();
  size_t take = std::min(n, static_cast<size_t>(max_frames_));
  frames.reserve(take);
  for (size_t k = 0; k < take; ++k) {
    size_t pos = take == 1 ? 0 : k * (n - 1) / (take - 1);
    frames.push_back(ds_->full_frame(example, view, times[pos]));
  }
  return models_.emplace(key, compute_median_background(frames, tau_))
      .first->second;
}

const BackgroundModel& BackgroundStore::substitution_source(
    const FrameIndex& ix, bool any_example, Rng& rng) const {
  if (any_example) {
    // Uniform over all (example, view) slots other than the frame's own.
    struct Slot { size_t e; int v; };
    std::vector<Slot> slots;
    for (size_t e = 0; e < ds_->examples().size(); ++e)
      for (int v : ds_->examples()[e].views)
        if (e != ix.example || v != ix.view) slots.push_back({e, v});
    if (slots.empty())
      throw SamplingError("background substitution needs a second view");
    const Slot& s = slots[rng.uniform_int(0, static_cast<int64_t>(slots.size()) - 1)];
    return model(s.e, s.v);
  }
  const auto& views = ds_->examples().at(ix.example).views;
  std::vector<int> others;
  for (int v : views)
    if (v != ix.view) others.push_back(v);
  if (others.empty())
    throw SamplingError("background substitution needs a second view");
  return model(ix.example,
               others[rng.uniform_int(0, static_cast<int64_t>(others.size()) - 1)]);
}

PairFrames BackgroundStore::apply_policy(const FrameIndex& a,
                                         const FrameIndex& b,
                                         const BackgroundPolicy& policy,
                                         Rng& rng) const {
  PairFrames out;
  BackgroundMode mode = policy.mode;
  if (mode == BackgroundMode::mixed)
    mode = rng.uniform() < policy.mixed_ratio ? BackgroundMode::remove
                                              : BackgroundMode::substitute;
  out.applied = mode;
  Image fa = ds_->full_frame(a);
  Image fb = ds_->full_frame(b);
  switch (mode) {
    case BackgroundMode::keep:
      out.a = std::move(fa);
      out.b = std::move(fb);
      break;
    case BackgroundMode::remove:
      out.a = remove_background(fa, model(a.example, a.view));
      out.b = remove_background(fb, model(b.example, b.view));
      break;
    case BackgroundMode::substitute:
      out.a = substitute_background(fa, model(a.example, a.view),
                                    substitution_source(a, policy.any_example, rng));
      out.b = substitute_background(fb, model(b.example, b.view),
                                    substitution_source(b, policy.any_example, rng));
      break;
    case BackgroundMode::mixed:
      throw InternalError("mixed mode must resolve before application");
  }
  return out;
}

void BackgroundStore::write_cache(const std::string& root) const {
  namespace fs = std::filesystem;
  for (size_t e = 0; e < ds_->examples().size(); ++e) {
    const auto& ex = ds_->examples()[e];
    for (int v : ex.views) {
      fs::path path = fs::path(root) / ex.subject / ex.action /
                      ("bg_view_" + format_int(v) + ".png");
      write_png(path.string(), model(e, v).median);
    }
  }
}

}  // namespace mvsync
