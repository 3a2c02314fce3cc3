// SPDX-License-Identifier: Apache-2.0
#include "metrics/metrics.hpp"

#include <Eigen/SVD>

#include "core/error.hpp"

namespace mvsync {

static void check_shapes(const Pose3D& pred, const Pose3D& gt) {
  if (pred.cols() != gt.cols() || pred.cols() < 1)
    throw ArgumentError("metrics: joint count mismatch");
}

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  int n = static_cast<int>(pred.cols());
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += (pred.col(j) - gt.col(j)).norm();
  return joint_correction(n) * sum / n;
}

AlignmentResult scale_align(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  double den = pred.squaredNorm();
  if (den <= 0.0) throw AlignmentError("scale_align: zero prediction");
  AlignmentResult r;
  r.scale = (pred.array() * gt.array()).sum() / den;
  r.residual = (r.scale * pred - gt).squaredNorm();
  return r;
}

double nmpjpe(const Pose3D& pred, const Pose3D& gt) {
  AlignmentResult a = scale_align(pred, gt);
  return mpjpe(a.scale * pred, gt);
}

AlignmentResult procrustes_align(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  if (pred.cols() < 3)
    throw AlignmentError("procrustes_align: need at least 3 joints");
  Eigen::Vector3d mx = pred.rowwise().mean();
  Eigen::Vector3d my = gt.rowwise().mean();
  Pose3D xc = pred.colwise() - mx;
  Pose3D yc = gt.colwise() - my;
  double xnorm = xc.squaredNorm();
  if (xnorm <= 0.0) throw AlignmentError("procrustes_align: degenerate input");

  Eigen::Matrix3d H = xc * yc.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Rank < 2 means the points lie on a line (or a point): the minimizing
  // rotation is not unique and the closed form is unreliable.
  if (svd.singularValues()(1) <= 1e-9 * (1.0 + svd.singularValues()(0)))
    throw AlignmentError("procrustes_align: collinear configuration");
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  if ((V * U.transpose()).determinant() < 0.0) d(2) = -1.0;
  Eigen::Matrix3d R = V * d.asDiagonal() * U.transpose();

  AlignmentResult r;
  r.rotation = R;
  r.scale = (R * H).trace() / xnorm;
  if (r.scale <= 0.0)
    throw AlignmentError("procrustes_align: non-positive optimal scale");
  r.translation = my - r.scale * (R * mx);
  r.residual = (apply_alignment(r, pred) - gt).squaredNorm();
  return r;
}

double pmpjpe(const Pose3D& pred, const Pose3D& gt) {
  AlignmentResult a = procrustes_align(pred, gt);
  return mpjpe(apply_alignment(a, pred), gt);
}

}  // namespace mvsync
