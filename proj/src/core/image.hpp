// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace mvsync {

// Planar float RGB image, values nominally in [0, 1]. Channel-major layout
// (all of R, then G, then B) so a channel plane is a contiguous slab.
class Image {
 public:
  Image() = default;
  Image(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<size_t>(width) * height * 3, 0.0f) {
    if (width <= 0 || height <= 0) throw ArgumentError("Image: empty size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t pixels() const { return static_cast<size_t>(width_) * height_; }

  float* plane(int c) { return data_.data() + static_cast<size_t>(c) * pixels(); }
  const float* plane(int c) const {
    return data_.data() + static_cast<size_t>(c) * pixels();
  }

  float& at(int c, int x, int y) {
    return data_[static_cast<size_t>(c) * pixels() + static_cast<size_t>(y) * width_ + x];
  }
  float at(int c, int x, int y) const {
    return data_[static_cast<size_t>(c) * pixels() + static_cast<size_t>(y) * width_ + x];
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  size_t size() const { return data_.size(); }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Mirror about the vertical axis: (x, y) -> (W - 1 - x, y).
Image mirror_horizontal(const Image& img);

// Snap every value to the nearest representable 8-bit level. Applied at
// render time so in-memory images survive a PNG round trip bit for bit.
void quantize_u8(Image& img);

// PNG I/O. Values are clamped to [0, 1] and stored as 8-bit RGB.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Bilinear sample of an axis-aligned or rotated square patch.
// The patch covers a square of side `size` source pixels centred on
// (cx, cy), rotated by `angle` radians, scaled into out_size x out_size.
// Samples outside the source image clamp to the border.
Image sample_patch(const Image& src, double cx, double cy, double size,
                   int out_size, double angle = 0.0);

}  // namespace mvsync
