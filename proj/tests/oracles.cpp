// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace mvsync::oracle {

namespace {

Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q) {
  Eigen::Quaterniond qq(q(0), q(1), q(2), q(3));
  qq.normalize();
  return qq.toRotationMatrix();
}

// Residual with closed-form scale and translation for a fixed rotation.
// Centering both clouds makes the optimal translation implicit.
double residual_for_rotation(const Pose3D& x, const Pose3D& y,
                             const Eigen::Matrix3d& R) {
  Eigen::Vector3d mx = x.rowwise().mean();
  Eigen::Vector3d my = y.rowwise().mean();
  Pose3D xc = x.colwise() - mx;
  Pose3D yc = y.colwise() - my;
  Pose3D rx = R * xc;
  double num = (rx.array() * yc.array()).sum();
  double den = xc.squaredNorm();
  double s = num / den;
  if (s <= 0.0) s = 1e-12;  // search only over positive scales
  return (s * rx - yc).squaredNorm();
}

}  // namespace

double procrustes_residual_search(const Pose3D& x, const Pose3D& y, Rng& rng,
                                  int restarts) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q(i) = rng.normal();
    q.normalize();
    double cur = residual_for_rotation(x, y, quat_to_matrix(q));
    double step = 0.5;
    while (step > 1e-9) {
      bool improved = false;
      for (int trial = 0; trial < 30; ++trial) {
        Eigen::Vector4d cand = q;
        for (int i = 0; i < 4; ++i) cand(i) += step * rng.normal();
        cand.normalize();
        double v = residual_for_rotation(x, y, quat_to_matrix(cand));
        if (v < cur) {
          cur = v;
          q = cand;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::min(best, cur);
  }
  return best;
}

double best_scale_search(const Pose3D& pred, const Pose3D& gt) {
  auto sse = [&](double s) { return (s * pred - gt).squaredNorm(); };
  // Coarse bracket over a wide positive range.
  double best_s = 1.0, best_v = sse(1.0);
  for (int i = 0; i <= 4000; ++i) {
    double s = -20.0 + 40.0 * i / 4000.0;
    double v = sse(s);
    if (v < best_v) {
      best_v = v;
      best_s = s;
    }
  }
  double lo = best_s - 0.02, hi = best_s + 0.02;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = sse(c), fd = sse(d);
  for (int it = 0; it < 200; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = sse(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = sse(d);
    }
  }
  return 0.5 * (a + b);
}

Eigen::Matrix2Xd project_homogeneous(const Pose3D& pose_world,
                                     const Eigen::Matrix3d& R,
                                     const Eigen::Vector3d& t, double f,
                                     double cx, double cy) {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = f;
  K(1, 1) = f;
  K(0, 2) = cx;
  K(1, 2) = cy;
  Eigen::Matrix<double, 3, 4> Rt;
  Rt.leftCols<3>() = R;
  Rt.col(3) = t;
  Eigen::Matrix<double, 3, 4> P = K * Rt;
  Eigen::Matrix2Xd out(2, pose_world.cols());
  for (int j = 0; j < pose_world.cols(); ++j) {
    Eigen::Vector4d ph;
    ph << pose_world.col(j), 1.0;
    Eigen::Vector3d uvw = P * ph;
    out(0, j) = uvw(0) / uvw(2);
    out(1, j) = uvw(1) / uvw(2);
  }
  return out;
}

double median_full_sort(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double central_difference(const std::function<double()>& f, float* x,
                          double eps) {
  float saved = *x;
  *x = static_cast<float>(saved + eps);
  double fp = f();
  *x = static_cast<float>(saved - eps);
  double fm = f();
  *x = saved;
  return (fp - fm) / (2.0 * eps);
}

double chi_squared_uniform(const std::vector<int64_t>& counts) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  double expected = static_cast<double>(total) / counts.size();
  double stat = 0.0;
  for (int64_t c : counts) {
    double d = c - expected;
    stat += d * d / expected;
  }
  return stat;
}

double chi_squared_quantile99(int df) {
  const double z99 = 2.3263478740;  // standard normal 0.99 quantile
  double k = df;
  double a = 1.0 - 2.0 / (9.0 * k) + z99 * std::sqrt(2.0 / (9.0 * k));
  return k * a * a * a;
}

}  // namespace mvsync::oracle
