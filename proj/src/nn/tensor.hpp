// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace mvsync {

// Activation batch. Values are stored channel-major: row c is a contiguous
// run of B*H*W values ordered (b, y, x). Vectors and embeddings use H=W=1.
template <typename T>
struct Act {
  int C = 0, B = 0, H = 0, W = 0;
  std::vector<T> v;

  Act() = default;
  Act(int c, int b, int h, int w) { resize(c, b, h, w); }

  void resize(int c, int b, int h, int w) {
    C = c;
    B = b;
    H = h;
    W = w;
    v.assign(static_cast<size_t>(c) * b * h * w, T(0));
  }

  size_t cols() const { return static_cast<size_t>(B) * H * W; }
  size_t size() const { return v.size(); }

  T* row(int c) { return v.data() + static_cast<size_t>(c) * cols(); }
  const T* row(int c) const { return v.data() + static_cast<size_t>(c) * cols(); }

  T& at(int c, int b, int y, int x) {
    return v[static_cast<size_t>(c) * cols() +
             (static_cast<size_t>(b) * H + y) * W + x];
  }
  T at(int c, int b, int y, int x) const {
    return v[static_cast<size_t>(c) * cols() +
             (static_cast<size_t>(b) * H + y) * W + x];
  }
};

// A trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<T> w, g;

  void alloc(std::string n, size_t count) {
    name = std::move(n);
    w.assign(count, T(0));
    g.assign(count, T(0));
  }
  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

// Named view into persistent model state (parameters, running statistics,
// optimizer moments) used by the checkpoint container.
template <typename T>
struct StateEntry {
  std::string name;
  std::vector<T>* data;
};

template <typename T>
using StateDict = std::vector<StateEntry<T>>;

}  // namespace mvsync
