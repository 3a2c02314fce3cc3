// SPDX-License-Identifier: Apache-2.0
#include "synth/render.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace mvsync {

namespace {

// Bilinear value-noise layer on a coarse random grid.
void add_value_noise(Image& img, Rng& rng, int grid, double amplitude) {
  std::vector<double> values(static_cast<size_t>(grid) * grid * 3);
  for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  int size = img.width();
  for (int c = 0; c < 3; ++c) {
    float* plane = img.plane(c);
    for (int y = 0; y < size; ++y) {
      double gy = static_cast<double>(y) / size * (grid - 1);
      int y0 = static_cast<int>(gy);
      int y1 = std::min(y0 + 1, grid - 1);
      double fy = gy - y0;
      for (int x = 0; x < size; ++x) {
        double gx = static_cast<double>(x) / size * (grid - 1);
        int x0 = static_cast<int>(gx);
        int x1 = std::min(x0 + 1, grid - 1);
        double fx = gx - x0;
        auto v = [&](int yy, int xx) {
          return values[(static_cast<size_t>(yy) * grid + xx) * 3 + c];
        };
        double top = v(y0, x0) + fx * (v(y0, x1) - v(y0, x0));
        double bot = v(y1, x0) + fx * (v(y1, x1) - v(y1, x0));
        plane[static_cast<size_t>(y) * size + x] +=
            static_cast<float>(amplitude * (top + fy * (bot - top)));
      }
    }
  }
}

}  // namespace

Image render_background(int size, uint64_t seed, bool symmetric) {
  Rng rng = Rng::substream(seed, 0x626746bULL);
  Image img(size, size);
  double base[3];
  for (double& b : base) b = rng.uniform(0.25, 0.6);
  for (int c = 0; c < 3; ++c) {
    float* plane = img.plane(c);
    // Gentle vertical gradient under the noise.
    double slope = rng.uniform(-0.08, 0.08);
    for (int y = 0; y < size; ++y) {
      float v = static_cast<float>(base[c] + slope * y / size);
      for (int x = 0; x < size; ++x)
        plane[static_cast<size_t>(y) * size + x] = v;
    }
  }
  add_value_noise(img, rng, 5, 0.10);
  add_value_noise(img, rng, 11, 0.05);

  int n_rects = static_cast<int>(rng.uniform_int(4, 7));
  for (int r = 0; r < n_rects; ++r) {
    int w = static_cast<int>(rng.uniform_int(size / 8, size / 2));
    int h = static_cast<int>(rng.uniform_int(size / 8, size / 2));
    int x0 = static_cast<int>(rng.uniform_int(0, size - 1));
    int y0 = static_cast<int>(rng.uniform_int(0, size - 1));
    double alpha = rng.uniform(0.25, 0.5);
    double color[3];
    for (double& c : color) c = rng.uniform(0.15, 0.7);
    for (int y = y0; y < std::min(y0 + h, size); ++y)
      for (int x = x0; x < std::min(x0 + w, size); ++x)
        for (int c = 0; c < 3; ++c) {
          float& p = img.at(c, x, y);
          p = static_cast<float>((1.0 - alpha) * p + alpha * color[c]);
        }
  }

  if (symmetric) {
    Image m = mirror_horizontal(img);
    for (size_t i = 0; i < img.size(); ++i)
      img.data()[i] = 0.5f * (img.data()[i] + m.data()[i]);
  }
  for (float* p = img.data(); p != img.data() + img.size(); ++p)
    *p = std::clamp(*p, 0.0f, 1.0f);
  quantize_u8(img);
  return img;
}

Eigen::Vector3d subject_color(uint64_t seed) {
  Rng rng = Rng::substream(seed, 0x626f6479ULL);
  Eigen::Vector3d c(rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0),
                    rng.uniform(0.1, 1.0));
  int hi = 0;
  c.maxCoeff(&hi);
  c(hi) = 1.0;  // keep one saturated channel so the figure stands out
  return c;
}

namespace {

struct Bone {
  int a, b;            // joint endpoints
  double radius_mm;
  double shade;        // chirality shading multiplier
};

// Right limbs darker, left lighter, midline in between.
const Bone kBones[] = {
    {0, 1, 55, 0.74},  {1, 2, 52, 0.74},  {2, 3, 42, 0.74},
    {0, 4, 55, 1.0},   {4, 5, 52, 1.0},   {5, 6, 42, 1.0},
    {0, 7, 70, 0.88},  {7, 8, 70, 0.88},  {8, 9, 45, 0.88},
    {9, 10, 85, 0.92},
    {8, 11, 45, 1.0},  {11, 12, 40, 1.0}, {12, 13, 33, 1.0},
    {8, 14, 45, 0.74}, {14, 15, 40, 0.74}, {15, 16, 33, 0.74},
};

}  // namespace

Image render_view(const Pose3D& pose_cam, const Eigen::Matrix2Xd& proj,
                  const CameraModel& cam, const Image& background,
                  const Eigen::Vector3d& body_color,
                  std::vector<float>* coverage) {
  Image img = background;
  int size = img.width();
  if (coverage) coverage->assign(static_cast<size_t>(size) * img.height(), 0.0f);

  // Painter's order: larger mean depth first.
  std::vector<int> order(std::size(kBones));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    double zi = pose_cam(2, kBones[i].a) + pose_cam(2, kBones[i].b);
    double zj = pose_cam(2, kBones[j].a) + pose_cam(2, kBones[j].b);
    if (zi != zj) return zi > zj;
    return i < j;
  });

  for (int bi : order) {
    const Bone& bone = kBones[bi];
    Eigen::Vector2d a = proj.col(bone.a), b = proj.col(bone.b);
    double mean_z = 0.5 * (pose_cam(2, bone.a) + pose_cam(2, bone.b));
    double r = cam.f * bone.radius_mm / mean_z;
    double shade = bone.shade;
    float col[3] = {static_cast<float>(body_color.x() * shade),
                    static_cast<float>(body_color.y() * shade),
                    static_cast<float>(body_color.z() * shade)};

    int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - r - 1)));
    int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + r + 1)));
    int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - r - 1)));
    int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + r + 1)));

    Eigen::Vector2d ab = b - a;
    double ab2 = ab.squaredNorm();
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        Eigen::Vector2d p(x + 0.5, y + 0.5);
        double t = ab2 > 0.0 ? std::clamp((p - a).dot(ab) / ab2, 0.0, 1.0) : 0.0;
        double d = (p - (a + t * ab)).norm();
        double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
        if (cov <= 0.0) continue;
        float fc = static_cast<float>(cov);
        for (int c = 0; c < 3; ++c) {
          float& px = img.at(c, x, y);
          px = (1.0f - fc) * px + fc * col[c];
        }
        if (coverage) {
          float& m = (*coverage)[static_cast<size_t>(y) * size + x];
          m = std::max(m, fc);
        }
      }
    }
  }
  quantize_u8(img);
  return img;
}

}  // namespace mvsync
