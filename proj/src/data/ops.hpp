// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "data/dataset.hpp"

namespace mvsync {

// Square crop centered on the box, resampled to out_size x out_size.
Image crop_subject(const Image& frame, const BBox& box, int out_size);

// Rotate a camera-coordinate pose by the minimal rotation that carries the
// optical axis onto the ray through crop_center, virtually re-centering the
// camera on the subject. Rigid: inter-joint distances are preserved.
Pose3D rotation_correct_pose(const Pose3D& pose, const CameraModel& intrinsics,
                             const Eigen::Vector2d& crop_center);

// Greedy low-motion frame dropping: a frame is kept iff its motion from the
// previously kept frame is >= threshold. Motion is mean per-joint 3D
// displacement (mm) when poses exist (identical in every view, since view
// transforms are rigid), else mean absolute pixel difference averaged over
// views. Time sets stay shared across views.
DatasetPtr filter_static(DatasetPtr ds, double motion_threshold);

// Keep times t with t = 1 (mod stride).
DatasetPtr eval_subsample(DatasetPtr ds, int stride = 64);

// Keep examples whose subject is listed.
DatasetPtr select_subjects(DatasetPtr ds, const std::vector<std::string>& subjects);

// Motion between two times of one example, per the filter_static measure.
double motion_between(const MultiViewDataset& ds, size_t example, int t_a, int t_b);

// Smallest threshold (by bisection) whose retained fraction is nearest the
// target; with the default target the result lands in [0.70, 0.80] on data
// with steady motion.
double calibrate_motion_threshold(DatasetPtr ds, double target_retained = 0.75);

}  // namespace mvsync
