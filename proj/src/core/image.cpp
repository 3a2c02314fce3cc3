// SPDX-License-Identifier: Apache-2.0
#include "core/image.hpp"

#include <algorithm>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace mvsync {

Image mirror_horizontal(const Image& img) {
  Image out(img.width(), img.height());
  int w = img.width(), h = img.height();
  for (int c = 0; c < 3; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      const float* srow = src + static_cast<size_t>(y) * w;
      float* drow = dst + static_cast<size_t>(y) * w;
      for (int x = 0; x < w; ++x) drow[x] = srow[w - 1 - x];
    }
  }
  return out;
}

static inline uint8_t to_u8(float v) {
  float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

void quantize_u8(Image& img) {
  float* p = img.data();
  size_t n = img.size();
  for (size_t i = 0; i < n; ++i) p[i] = to_u8(p[i]) / 255.0f;
}

void write_png(const std::string& path, const Image& img) {
  if (img.empty()) throw ArgumentError("write_png: empty image");
  int w = img.width(), h = img.height();
  cv::Mat mat(h, w, CV_8UC3);
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  for (int y = 0; y < h; ++y) {
    uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      size_t i = static_cast<size_t>(y) * w + x;
      row[3 * x + 0] = to_u8(b[i]);
      row[3 * x + 1] = to_u8(g[i]);
      row[3 * x + 2] = to_u8(r[i]);
    }
  }
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  if (!cv::imwrite(path, mat)) throw IoError("write_png: cannot write " + path);
}

Image read_png(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw DecodeError("read_png: cannot decode " + path);
  Image img(mat.cols, mat.rows);
  float* r = img.plane(0);
  float* g = img.plane(1);
  float* b = img.plane(2);
  for (int y = 0; y < mat.rows; ++y) {
    const uint8_t* row = mat.ptr<uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      size_t i = static_cast<size_t>(y) * mat.cols + x;
      b[i] = row[3 * x + 0] / 255.0f;
      g[i] = row[3 * x + 1] / 255.0f;
      r[i] = row[3 * x + 2] / 255.0f;
    }
  }
  return img;
}

static inline float sample_clamped(const float* plane, int w, int h, double sx,
                                   double sy) {
  int x0 = static_cast<int>(std::floor(sx));
  int y0 = static_cast<int>(std::floor(sy));
  double fx = sx - x0, fy = sy - y0;
  int x1 = x0 + 1, y1 = y0 + 1;
  x0 = std::clamp(x0, 0, w - 1);
  x1 = std::clamp(x1, 0, w - 1);
  y0 = std::clamp(y0, 0, h - 1);
  y1 = std::clamp(y1, 0, h - 1);
  double v00 = plane[static_cast<size_t>(y0) * w + x0];
  double v10 = plane[static_cast<size_t>(y0) * w + x1];
  double v01 = plane[static_cast<size_t>(y1) * w + x0];
  double v11 = plane[static_cast<size_t>(y1) * w + x1];
  double top = v00 + fx * (v10 - v00);
  double bot = v01 + fx * (v11 - v01);
  return static_cast<float>(top + fy * (bot - top));
}

Image sample_patch(const Image& src, double cx, double cy, double size,
                   int out_size, double angle) {
  if (src.empty()) throw ArgumentError("sample_patch: empty source");
  if (out_size <= 0 || size <= 0.0)
    throw ArgumentError("sample_patch: non-positive size");
  Image out(out_size, out_size);
  double step = size / out_size;
  double ca = std::cos(angle), sa = std::sin(angle);
  int w = src.width(), h = src.height();
  for (int c = 0; c < 3; ++c) {
    const float* plane = src.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < out_size; ++y) {
      // Offset of the output pixel centre from the patch centre.
      double oy = (y + 0.5) * step - size / 2.0;
      for (int x = 0; x < out_size; ++x) {
        double ox = (x + 0.5) * step - size / 2.0;
        double sx = cx + ca * ox - sa * oy - 0.5;
        double sy = cy + sa * ox + ca * oy - 0.5;
        dst[static_cast<size_t>(y) * out_size + x] =
            sample_clamped(plane, w, h, sx, sy);
      }
    }
  }
  return out;
}

}  // namespace mvsync
