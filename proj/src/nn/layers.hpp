// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "core/rng.hpp"
#include "nn/gemm.hpp"
#include "nn/tensor.hpp"

namespace mvsync {

// Shared im2col workspace so convolutions do not each hold a peak-sized
// buffer. Single-threaded training keeps this safe.
template <typename T>
struct ConvScratch {
  std::vector<T> col, dcol;
};

// Gather conv patches: col is (C*KH*KW) x (B*Ho*Wo), column order (b, yo, xo).
template <typename T>
void im2col(const Act<T>& x, int k, int stride, int pad, int Ho, int Wo,
            std::vector<T>& col) {
  const size_t n_out = static_cast<size_t>(x.B) * Ho * Wo;
  col.assign(static_cast<size_t>(x.C) * k * k * n_out, T(0));
  for (int c = 0; c < x.C; ++c) {
    const T* plane = x.row(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst_row = col.data() +
                     ((static_cast<size_t>(c) * k + ky) * k + kx) * n_out;
        for (int b = 0; b < x.B; ++b) {
          const T* img = plane + static_cast<size_t>(b) * x.H * x.W;
          for (int yo = 0; yo < Ho; ++yo) {
            int y = yo * stride + ky - pad;
            T* dst = dst_row + (static_cast<size_t>(b) * Ho + yo) * Wo;
            if (y < 0 || y >= x.H) continue;  // stays zero
            const T* src = img + static_cast<size_t>(y) * x.W;
            if (stride == 1) {
              int x0 = kx - pad;
              int lo = std::max(0, -x0);
              int hi = std::min(Wo, x.W - x0);
              if (hi > lo)
                std::memcpy(dst + lo, src + x0 + lo,
                            static_cast<size_t>(hi - lo) * sizeof(T));
            } else {
              for (int xo = 0; xo < Wo; ++xo) {
                int xi = xo * stride + kx - pad;
                if (xi >= 0 && xi < x.W) dst[xo] = src[xi];
              }
            }
          }
        }
      }
    }
  }
}

// Scatter-add of col gradients back onto the input layout.
template <typename T>
void col2im(const std::vector<T>& col, int C, int B, int H, int W, int k,
            int stride, int pad, int Ho, int Wo, Act<T>& dx) {
  dx.resize(C, B, H, W);
  const size_t n_out = static_cast<size_t>(B) * Ho * Wo;
  for (int c = 0; c < C; ++c) {
    T* plane = dx.row(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src_row = col.data() +
                           ((static_cast<size_t>(c) * k + ky) * k + kx) * n_out;
        for (int b = 0; b < B; ++b) {
          T* img = plane + static_cast<size_t>(b) * H * W;
          for (int yo = 0; yo < Ho; ++yo) {
            int y = yo * stride + ky - pad;
            if (y < 0 || y >= H) continue;
            const T* src = src_row + (static_cast<size_t>(b) * Ho + yo) * Wo;
            T* dst = img + static_cast<size_t>(y) * W;
            for (int xo = 0; xo < Wo; ++xo) {
              int xi = xo * stride + kx - pad;
              if (xi >= 0 && xi < W) dst[xi] += src[xo];
            }
          }
        }
      }
    }
  }
}

// Square-kernel convolution without bias (always followed by a norm layer).
template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int cin, int cout, int k, int stride, int pad)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    weight.alloc(name + ".w", static_cast<size_t>(cout) * cin * k * k);
  }

  void init(Rng& rng) {
    double std = std::sqrt(2.0 / (static_cast<double>(cin_) * k_ * k_));
    for (auto& w : weight.w) w = static_cast<T>(rng.normal(0.0, std));
  }

  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Act<T> forward(const Act<T>& x, ConvScratch<T>& s, bool train) {
    if (x.C != cin_) throw ArgumentError(weight.name + ": channel mismatch");
    int Ho = out_size(x.H), Wo = out_size(x.W);
    im2col(x, k_, stride_, pad_, Ho, Wo, s.col);
    Act<T> y(cout_, x.B, Ho, Wo);
    int K = cin_ * k_ * k_;
    int N = static_cast<int>(y.cols());
    gemm(false, false, cout_, N, K, T(1), weight.w.data(), s.col.data(), T(0),
         y.v.data());
    if (train) x_ = x;
    return y;
  }

  Act<T> backward(const Act<T>& dy, ConvScratch<T>& s) {
    int Ho = dy.H, Wo = dy.W;
    int K = cin_ * k_ * k_;
    int N = static_cast<int>(dy.cols());
    im2col(x_, k_, stride_, pad_, Ho, Wo, s.col);
    gemm(false, true, cout_, K, N, T(1), dy.v.data(), s.col.data(), T(1),
         weight.g.data());
    s.dcol.assign(static_cast<size_t>(K) * N, T(0));
    gemm(true, false, K, N, cout_, T(1), weight.w.data(), dy.v.data(), T(0),
         s.dcol.data());
    Act<T> dx;
    col2im(s.dcol, cin_, x_.B, x_.H, x_.W, k_, stride_, pad_, Ho, Wo, dx);
    return dx;
  }

  void release() { x_ = Act<T>(); }

  Param<T> weight;

 private:
  int cin_, cout_, k_, stride_, pad_;
  Act<T> x_;
};

// Per-channel batch normalization over batch and spatial positions.
template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::string name, int channels)
      : channels_(channels), name_(std::move(name)) {
    gamma.alloc(name_ + ".gamma", channels);
    beta.alloc(name_ + ".beta", channels);
    std::fill(gamma.w.begin(), gamma.w.end(), T(1));
    running_mean.assign(channels, T(0));
    running_var.assign(channels, T(1));
  }

  // use_running forces inference statistics (frozen prefix during training).
  Act<T> forward(const Act<T>& x, bool train, bool use_running = false) {
    if (x.C != channels_) throw ArgumentError(name_ + ": channel mismatch");
    size_t n = x.cols();
    Act<T> y(x.C, x.B, x.H, x.W);
    bool batch_stats = train && !use_running;
    xhat_.assign(x.size(), T(0));
    invstd_.assign(channels_, T(0));
    for (int c = 0; c < channels_; ++c) {
      const T* xr = x.row(c);
      double mean, var;
      if (batch_stats) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) sum += xr[i];
        mean = sum / n;
        double sq = 0.0;
        for (size_t i = 0; i < n; ++i) {
          double d = xr[i] - mean;
          sq += d * d;
        }
        var = sq / n;
        double unbiased = n > 1 ? sq / (n - 1) : var;
        running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] +
                                         momentum * mean);
        running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] +
                                        momentum * unbiased);
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      T inv = static_cast<T>(1.0 / std::sqrt(var + eps));
      invstd_[c] = inv;
      T m = static_cast<T>(mean);
      T g = gamma.w[c], b = beta.w[c];
      T* xh = xhat_.data() + static_cast<size_t>(c) * n;
      T* yr = y.row(c);
      for (size_t i = 0; i < n; ++i) {
        xh[i] = (xr[i] - m) * inv;
        yr[i] = g * xh[i] + b;
      }
    }
    batch_stats_ = batch_stats;
    return y;
  }

  Act<T> backward(const Act<T>& dy) {
    size_t n = dy.cols();
    Act<T> dx(dy.C, dy.B, dy.H, dy.W);
    for (int c = 0; c < channels_; ++c) {
      const T* dyr = dy.row(c);
      const T* xh = xhat_.data() + static_cast<size_t>(c) * n;
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (size_t i = 0; i < n; ++i) {
        sum_dy += dyr[i];
        sum_dy_xh += dyr[i] * xh[i];
      }
      gamma.g[c] += static_cast<T>(sum_dy_xh);
      beta.g[c] += static_cast<T>(sum_dy);
      T g = gamma.w[c], inv = invstd_[c];
      T* dxr = dx.row(c);
      if (batch_stats_) {
        T a = static_cast<T>(sum_dy / n);
        T b = static_cast<T>(sum_dy_xh / n);
        for (size_t i = 0; i < n; ++i)
          dxr[i] = g * inv * (dyr[i] - a - xh[i] * b);
      } else {
        for (size_t i = 0; i < n; ++i) dxr[i] = g * inv * dyr[i];
      }
    }
    return dx;
  }

  void release() {
    xhat_.clear();
    xhat_.shrink_to_fit();
  }

  Param<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

 private:
  int channels_;
  std::string name_;
  std::vector<T> xhat_, invstd_;
  bool batch_stats_ = false;
};

template <typename T>
class ReLU {
 public:
  Act<T> forward(const Act<T>& x, bool train) {
    Act<T> y = x;
    if (train) mask_.assign(x.size(), 0);
    for (size_t i = 0; i < y.v.size(); ++i) {
      if (y.v[i] > T(0)) {
        if (train) mask_[i] = 1;
      } else {
        y.v[i] = T(0);
      }
    }
    return y;
  }

  Act<T> backward(const Act<T>& dy) {
    Act<T> dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i)
      if (!mask_[i]) dx.v[i] = T(0);
    return dx;
  }

 private:
  std::vector<uint8_t> mask_;
};

// Spatial mean per channel and image: (C x B*H*W) -> (C x B).
template <typename T>
class GlobalAvgPool {
 public:
  Act<T> forward(const Act<T>& x) {
    H_ = x.H;
    W_ = x.W;
    Act<T> y(x.C, x.B, 1, 1);
    size_t hw = static_cast<size_t>(x.H) * x.W;
    for (int c = 0; c < x.C; ++c) {
      const T* xr = x.row(c);
      T* yr = y.row(c);
      for (int b = 0; b < x.B; ++b) {
        double sum = 0.0;
        const T* img = xr + static_cast<size_t>(b) * hw;
        for (size_t i = 0; i < hw; ++i) sum += img[i];
        yr[b] = static_cast<T>(sum / hw);
      }
    }
    return y;
  }

  Act<T> backward(const Act<T>& dy, int B) {
    size_t hw = static_cast<size_t>(H_) * W_;
    Act<T> dx(dy.C, B, H_, W_);
    for (int c = 0; c < dy.C; ++c) {
      const T* dyr = dy.row(c);
      T* dxr = dx.row(c);
      for (int b = 0; b < B; ++b) {
        T v = static_cast<T>(dyr[b] / static_cast<double>(hw));
        T* img = dxr + static_cast<size_t>(b) * hw;
        for (size_t i = 0; i < hw; ++i) img[i] = v;
      }
    }
    return dx;
  }

 private:
  int H_ = 0, W_ = 0;
};

// Fully connected layer on vector activations (H = W = 1).
template <typename T>
class Linear {
 public:
  Linear(std::string name, int in_dim, int out_dim)
      : in_(in_dim), out_(out_dim) {
    weight.alloc(name + ".w", static_cast<size_t>(out_dim) * in_dim);
    bias.alloc(name + ".b", out_dim);
  }

  // Heads are zero-initialized by default; call init for hidden layers.
  void init(Rng& rng) {
    double std = std::sqrt(2.0 / in_);
    for (auto& w : weight.w) w = static_cast<T>(rng.normal(0.0, std));
  }

  Act<T> forward(const Act<T>& x, bool train) {
    if (x.C != in_ || x.H != 1 || x.W != 1)
      throw ArgumentError(weight.name + ": input shape mismatch");
    Act<T> y(out_, x.B, 1, 1);
    gemm(false, false, out_, x.B, in_, T(1), weight.w.data(), x.v.data(), T(0),
         y.v.data());
    for (int o = 0; o < out_; ++o) {
      T* yr = y.row(o);
      for (int b = 0; b < x.B; ++b) yr[b] += bias.w[o];
    }
    if (train) x_ = x;
    return y;
  }

  Act<T> backward(const Act<T>& dy) {
    gemm(false, true, out_, in_, dy.B, T(1), dy.v.data(), x_.v.data(), T(1),
         weight.g.data());
    for (int o = 0; o < out_; ++o) {
      const T* dyr = dy.row(o);
      double sum = 0.0;
      for (int b = 0; b < dy.B; ++b) sum += dyr[b];
      bias.g[o] += static_cast<T>(sum);
    }
    Act<T> dx(in_, dy.B, 1, 1);
    gemm(true, false, in_, dy.B, out_, T(1), weight.w.data(), dy.v.data(), T(0),
         dx.v.data());
    return dx;
  }

  Param<T> weight, bias;

 private:
  int in_, out_;
  Act<T> x_;
};

}  // namespace mvsync
