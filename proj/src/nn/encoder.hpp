// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nn/layers.hpp"

namespace mvsync {

struct EncoderConfig {
  int in_channels = 3;
  std::vector<int> widths = {16, 32, 64, 128};
  int blocks_per_stage = 2;

  int embed_dim() const { return widths.back(); }
  int num_blocks() const {
    return static_cast<int>(widths.size()) * blocks_per_stage;
  }
};

// conv-bn-relu-conv-bn plus identity or projected shortcut, then relu.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int cin, int cout, int stride)
      : conv1_(name + ".conv1", cin, cout, 3, stride, 1),
        bn1_(name + ".bn1", cout),
        conv2_(name + ".conv2", cout, cout, 3, 1, 1),
        bn2_(name + ".bn2", cout) {
    if (stride != 1 || cin != cout) {
      proj_.emplace(name + ".proj", cin, cout, 1, stride, 0);
      proj_bn_.emplace(name + ".proj_bn", cout);
    }
  }

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (proj_) proj_->init(rng);
  }

  Act<T> forward(const Act<T>& x, ConvScratch<T>& s, bool train) {
    bool t = train && !frozen;
    Act<T> h = relu1_.forward(bn1_.forward(conv1_.forward(x, s, t), t, frozen), t);
    Act<T> main = bn2_.forward(conv2_.forward(h, s, t), t, frozen);
    Act<T> sc;
    if (proj_)
      sc = proj_bn_->forward(proj_->forward(x, s, t), t, frozen);
    else
      sc = x;
    for (size_t i = 0; i < main.v.size(); ++i) main.v[i] += sc.v[i];
    return relu_out_.forward(main, t);
  }

  Act<T> backward(const Act<T>& dy, ConvScratch<T>& s) {
    Act<T> d = relu_out_.backward(dy);
    Act<T> dx = conv1_.backward(
        bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(d), s))),
        s);
    if (proj_) {
      Act<T> dsc = proj_->backward(proj_bn_->backward(d), s);
      for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dsc.v[i];
    } else {
      for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += d.v[i];
    }
    return dx;
  }

  void params(std::vector<Param<T>*>& out) {
    out.push_back(&conv1_.weight);
    out.push_back(&bn1_.gamma);
    out.push_back(&bn1_.beta);
    out.push_back(&conv2_.weight);
    out.push_back(&bn2_.gamma);
    out.push_back(&bn2_.beta);
    if (proj_) {
      out.push_back(&proj_->weight);
      out.push_back(&proj_bn_->gamma);
      out.push_back(&proj_bn_->beta);
    }
  }

  void state(StateDict<T>& out) {
    std::vector<Param<T>*> ps;
    params(ps);
    for (auto* p : ps) out.push_back({p->name, &p->w});
    for (auto* bn : {&bn1_, &bn2_}) {
      out.push_back({bn->gamma.name + ".rmean", &bn->running_mean});
      out.push_back({bn->gamma.name + ".rvar", &bn->running_var});
    }
    if (proj_bn_) {
      out.push_back({proj_bn_->gamma.name + ".rmean", &proj_bn_->running_mean});
      out.push_back({proj_bn_->gamma.name + ".rvar", &proj_bn_->running_var});
    }
  }

  bool frozen = false;

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  std::optional<Conv2d<T>> proj_;
  std::optional<BatchNorm2d<T>> proj_bn_;
  ReLU<T> relu_out_;
};

// Residual backbone: strided stem, staged residual blocks, global average
// pooling. The embedding dimension equals the final stage width.
template <typename T>
class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg)
      : cfg_(cfg),
        stem_conv_("stem.conv", cfg.in_channels, cfg.widths.at(0), 3, 2, 1),
        stem_bn_("stem.bn", cfg.widths.at(0)) {
    int cin = cfg.widths[0];
    for (size_t s = 0; s < cfg.widths.size(); ++s) {
      int cout = cfg.widths[s];
      for (int b = 0; b < cfg.blocks_per_stage; ++b) {
        int stride = (s > 0 && b == 0) ? 2 : 1;
        std::string name =
            "s" + std::to_string(s) + ".b" + std::to_string(b);
        blocks_.push_back(
            std::make_unique<ResidualBlock<T>>(name, cin, cout, stride));
        cin = cout;
      }
    }
  }

  void init(Rng& rng) {
    stem_conv_.init(rng);
    for (auto& b : blocks_) b->init(rng);
  }

  int embed_dim() const { return cfg_.embed_dim(); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const EncoderConfig& config() const { return cfg_; }

  // Freeze the stem plus the first k blocks: inference statistics, no
  // gradient flow, parameters excluded from optimization.
  void set_frozen_blocks(int k) {
    if (k < 0 || k > num_blocks())
      throw ArgumentError("set_frozen_blocks: bad count");
    frozen_blocks_ = k;
    for (int i = 0; i < num_blocks(); ++i) blocks_[i]->frozen = i < k;
  }
  int frozen_blocks() const { return frozen_blocks_; }

  Act<T> forward(const Act<T>& images, bool train) {
    bool stem_frozen = frozen_blocks_ > 0;
    bool t = train && !stem_frozen;
    Act<T> h = stem_relu_.forward(
        stem_bn_.forward(stem_conv_.forward(images, scratch, t), t,
                         stem_frozen),
        t);
    for (auto& b : blocks_) h = b->forward(h, scratch, train);
    return gap_.forward(h);
  }

  // Accumulates parameter gradients; propagation stops at the frozen prefix.
  void backward(const Act<T>& dembed, int batch) {
    Act<T> d = gap_.backward(dembed, batch);
    for (int i = num_blocks() - 1; i >= frozen_blocks_; --i)
      d = blocks_[i]->backward(d, scratch);
    if (frozen_blocks_ == 0)
      stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(d)), scratch);
  }

  std::vector<Param<T>*> params(bool trainable_only = false) {
    std::vector<Param<T>*> out;
    if (!(trainable_only && frozen_blocks_ > 0)) {
      out.push_back(&stem_conv_.weight);
      out.push_back(&stem_bn_.gamma);
      out.push_back(&stem_bn_.beta);
    }
    for (int i = 0; i < num_blocks(); ++i) {
      if (trainable_only && i < frozen_blocks_) continue;
      blocks_[i]->params(out);
    }
    return out;
  }

  StateDict<T> state() {
    StateDict<T> out;
    out.push_back({stem_conv_.weight.name, &stem_conv_.weight.w});
    out.push_back({stem_bn_.gamma.name, &stem_bn_.gamma.w});
    out.push_back({stem_bn_.beta.name, &stem_bn_.beta.w});
    out.push_back({"stem.bn.gamma.rmean", &stem_bn_.running_mean});
    out.push_back({"stem.bn.gamma.rvar", &stem_bn_.running_var});
    for (auto& b : blocks_) b->state(out);
    return out;
  }

  ConvScratch<T> scratch;

 private:
  EncoderConfig cfg_;
  Conv2d<T> stem_conv_;
  BatchNorm2d<T> stem_bn_;
  ReLU<T> stem_relu_;
  std::vector<std::unique_ptr<ResidualBlock<T>>> blocks_;
  GlobalAvgPool<T> gap_;
  int frozen_blocks_ = 0;
};

}  // namespace mvsync
