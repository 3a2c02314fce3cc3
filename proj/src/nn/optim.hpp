// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nn/tensor.hpp"

namespace mvsync {

// Cosine annealing from lr0 at step 0 to lr_min at step total.
inline double cosine_lr(int64_t step, int64_t total, double lr0,
                        double lr_min) {
  if (total <= 0 || step >= total) return lr_min;
  if (step < 0) step = 0;
  double c = std::cos(3.14159265358979323846 * static_cast<double>(step) /
                      static_cast<double>(total));
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + c);
}

// Adam with decoupled weight decay. Moments are kept per parameter name so
// the state survives checkpoint round trips.
template <typename T>
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 1e-4)
      : b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

  void step(const std::vector<Param<T>*>& params, double lr) {
    ++t_;
    double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (auto* p : params) {
      auto& slot = moments_[p->name];
      if (slot.m.size() != p->w.size()) {
        slot.m.assign(p->w.size(), T(0));
        slot.v.assign(p->w.size(), T(0));
      }
      for (size_t i = 0; i < p->w.size(); ++i) {
        double g = p->g[i];
        double m = b1_ * slot.m[i] + (1.0 - b1_) * g;
        double v = b2_ * slot.v[i] + (1.0 - b2_) * g * g;
        slot.m[i] = static_cast<T>(m);
        slot.v[i] = static_cast<T>(v);
        double mhat = m / c1;
        double vhat = v / c2;
        p->w[i] = static_cast<T>(
            p->w[i] - lr * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p->w[i]));
      }
    }
  }

  int64_t steps_taken() const { return t_; }

  // Moments and the step counter, for checkpointing. The counter is stored
  // as a one-element tensor.
  StateDict<T> state(const std::vector<Param<T>*>& params) {
    StateDict<T> out;
    step_scalar_.assign(1, static_cast<T>(t_));
    out.push_back({"adam.t", &step_scalar_});
    for (auto* p : params) {
      auto& slot = moments_[p->name];
      if (slot.m.size() != p->w.size()) {
        slot.m.assign(p->w.size(), T(0));
        slot.v.assign(p->w.size(), T(0));
      }
      out.push_back({"adam.m." + p->name, &slot.m});
      out.push_back({"adam.v." + p->name, &slot.v});
    }
    return out;
  }

  // Call after loading a checkpoint into the vectors returned by state().
  void sync_step_from_state() { t_ = static_cast<int64_t>(step_scalar_.at(0)); }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  double b1_, b2_, eps_, wd_;
  int64_t t_ = 0;
  std::unordered_map<std::string, Slot> moments_;
  std::vector<T> step_scalar_;
};

}  // namespace mvsync
