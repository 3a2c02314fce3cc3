// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nn/encoder.hpp"

namespace mvsync {

enum class FusionMode { mult, concat, add, diff };
enum class SignalMask { both, sync_only, flip_only };

FusionMode parse_fusion(const std::string& s);
SignalMask parse_signal(const std::string& s);
const char* fusion_name(FusionMode m);
const char* signal_name(SignalMask m);

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(x)) without overflow; -log sigmoid(z) = softplus(-z).
inline double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

struct SSLStats {
  double loss = 0.0;
  double acc_sync = 0.0;
  double acc_flip = 0.0;
};

struct PairScores {
  double p_sync = 0.0;
  double p_noflip = 0.0;
};

// Per-triplet loss on raw logits: the synchronized pair should score high on
// both heads, the unsynchronized pair low on the sync head, the flipped pair
// low on the no-flip head. Inactive terms drop out entirely.
inline double ssl_triplet_loss(double z1_pos, double z1_neg, double z2_pos,
                               double z2_flip, SignalMask mask) {
  double loss = 0.0;
  if (mask != SignalMask::flip_only)
    loss += softplus(-z1_pos) + softplus(z1_neg);
  if (mask != SignalMask::sync_only)
    loss += softplus(-z2_pos) + softplus(z2_flip);
  return loss;
}

// Siamese encoder with pairwise feature fusion and two binary heads, one for
// synchronization and one for flip detection. Both branches share the same
// encoder instance, so weight sharing is structural.
template <typename T>
class SSLModel {
 public:
  static int fused_dim_for(const EncoderConfig& enc_cfg, FusionMode fusion) {
    return fusion == FusionMode::concat ? 2 * enc_cfg.embed_dim()
                                        : enc_cfg.embed_dim();
  }

  SSLModel(const EncoderConfig& enc_cfg, FusionMode fusion,
           bool concat_relu = false)
      : encoder(enc_cfg),
        head_sync("head_sync", fused_dim_for(enc_cfg, fusion), 1),
        head_flip("head_flip", fused_dim_for(enc_cfg, fusion), 1),
        fusion_(fusion),
        concat_relu_(concat_relu),
        fused_dim_(fused_dim_for(enc_cfg, fusion)) {}

  void init(Rng& rng) { encoder.init(rng); }  // heads stay zero

  FusionMode fusion() const { return fusion_; }
  int fused_dim() const { return fused_dim_; }

  // Pairwise fusion of embedding columns (2i, 2i+1) -> fused column i.
  Act<T> fuse_forward(const Act<T>& emb, bool train) {
    if (emb.B % 2 != 0) throw ArgumentError("fuse: odd embedding count");
    if (emb.C != encoder.embed_dim())
      throw ArgumentError("fuse: embedding length mismatch");
    int pairs = emb.B / 2;
    int D = emb.C;
    Act<T> fused(fused_dim_, pairs, 1, 1);
    for (int d = 0; d < D; ++d) {
      const T* e = emb.row(d);
      for (int p = 0; p < pairs; ++p) {
        T a = e[2 * p], b = e[2 * p + 1];
        switch (fusion_) {
          case FusionMode::mult:
            fused.row(d)[p] = a * b;
            break;
          case FusionMode::concat:
            fused.row(d)[p] = a;
            fused.row(D + d)[p] = b;
            break;
          case FusionMode::add:
            fused.row(d)[p] = a + b;
            break;
          case FusionMode::diff:
            fused.row(d)[p] = a - b;
            break;
        }
      }
    }
    bool relu = fusion_ == FusionMode::mult ||
                (fusion_ == FusionMode::concat && concat_relu_);
    if (relu) fused = fuse_relu_.forward(fused, train);
    if (train) emb_ = emb;
    return fused;
  }

  Act<T> fuse_backward(const Act<T>& dfused) {
    int pairs = dfused.B;
    int D = emb_.C;
    Act<T> df = dfused;
    bool relu = fusion_ == FusionMode::mult ||
                (fusion_ == FusionMode::concat && concat_relu_);
    if (relu) df = fuse_relu_.backward(df);
    Act<T> demb(D, 2 * pairs, 1, 1);
    for (int d = 0; d < D; ++d) {
      const T* e = emb_.row(d);
      T* de = demb.row(d);
      for (int p = 0; p < pairs; ++p) {
        T g = df.row(d)[p];
        switch (fusion_) {
          case FusionMode::mult:
            de[2 * p] = g * e[2 * p + 1];
            de[2 * p + 1] = g * e[2 * p];
            break;
          case FusionMode::concat:
            de[2 * p] = g;
            de[2 * p + 1] = df.row(D + d)[p];
            break;
          case FusionMode::add:
            de[2 * p] = g;
            de[2 * p + 1] = g;
            break;
          case FusionMode::diff:
            de[2 * p] = g;
            de[2 * p + 1] = -g;
            break;
        }
      }
    }
    return demb;
  }

  // Forward + backward over a triplet batch laid out as 6 images per
  // triplet: (pos_a, pos_b, neg_a, neg_b, flip_a, flip_b). Accumulates
  // gradients; the caller owns zeroing and the optimizer step.
  SSLStats train_step(const Act<T>& images, int triplets, SignalMask mask) {
    if (images.B != 6 * triplets)
      throw ArgumentError("train_step: batch is not 6 images per triplet");
    Act<T> emb = encoder.forward(images, true);
    Act<T> fused = fuse_forward(emb, true);
    Act<T> z1 = head_sync.forward(fused, true);
    Act<T> z2 = head_flip.forward(fused, true);

    int pairs = 3 * triplets;
    Act<T> dz1(1, pairs, 1, 1), dz2(1, pairs, 1, 1);
    bool sync_on = mask != SignalMask::flip_only;
    bool flip_on = mask != SignalMask::sync_only;
    double loss = 0.0;
    int sync_hits = 0, flip_hits = 0;
    for (int j = 0; j < triplets; ++j) {
      int p = 3 * j, n = 3 * j + 1, f = 3 * j + 2;
      double z1p = z1.v[p], z1n = z1.v[n];
      double z2p = z2.v[p], z2f = z2.v[f];
      loss += ssl_triplet_loss(z1p, z1n, z2p, z2f, mask);
      if (sync_on) {
        dz1.v[p] = static_cast<T>((sigmoid(z1p) - 1.0) / triplets);
        dz1.v[n] = static_cast<T>(sigmoid(z1n) / triplets);
      }
      if (flip_on) {
        dz2.v[p] = static_cast<T>((sigmoid(z2p) - 1.0) / triplets);
        dz2.v[f] = static_cast<T>(sigmoid(z2f) / triplets);
      }
      sync_hits += (z1p > 0.0) + (z1n < 0.0);
      flip_hits += (z2p > 0.0) + (z2f < 0.0);
    }
    loss /= triplets;
    if (!std::isfinite(loss)) throw NumericError("train_step: non-finite loss");

    Act<T> dfused = head_sync.backward(dz1);
    Act<T> dflip = head_flip.backward(dz2);
    for (size_t i = 0; i < dfused.v.size(); ++i) dfused.v[i] += dflip.v[i];
    Act<T> demb = fuse_backward(dfused);
    encoder.backward(demb, images.B);

    SSLStats stats;
    stats.loss = loss;
    stats.acc_sync = sync_hits / (2.0 * triplets);
    stats.acc_flip = flip_hits / (2.0 * triplets);
    return stats;
  }

  // Inference path: probabilities for consecutively paired images.
  std::vector<PairScores> predict_pairs(const Act<T>& images) {
    Act<T> emb = encoder.forward(images, false);
    Act<T> fused = fuse_forward(emb, false);
    Act<T> z1 = head_sync.forward(fused, false);
    Act<T> z2 = head_flip.forward(fused, false);
    std::vector<PairScores> out(fused.B);
    for (int p = 0; p < fused.B; ++p) {
      out[p].p_sync = sigmoid(z1.v[p]);
      out[p].p_noflip = sigmoid(z2.v[p]);
    }
    return out;
  }

  Act<T> encode(const Act<T>& images) { return encoder.forward(images, false); }

  std::vector<Param<T>*> params(bool trainable_only = false) {
    auto out = encoder.params(trainable_only);
    out.push_back(&head_sync.weight);
    out.push_back(&head_sync.bias);
    out.push_back(&head_flip.weight);
    out.push_back(&head_flip.bias);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  StateDict<T> state() {
    StateDict<T> out = encoder.state();
    out.push_back({head_sync.weight.name, &head_sync.weight.w});
    out.push_back({head_sync.bias.name, &head_sync.bias.w});
    out.push_back({head_flip.weight.name, &head_flip.weight.w});
    out.push_back({head_flip.bias.name, &head_flip.bias.w});
    return out;
  }

  Encoder<T> encoder;
  Linear<T> head_sync, head_flip;

 private:
  FusionMode fusion_;
  bool concat_relu_;
  int fused_dim_;
  ReLU<T> fuse_relu_;
  Act<T> emb_;
};

}  // namespace mvsync
