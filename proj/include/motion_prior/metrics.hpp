#pragma once

#include <string>
#include <utility>
#include <vector>

#include "motion_prior/kinematics.hpp"
#include "motion_prior/rotation.hpp"
#include "motion_prior/skeleton.hpp"

namespace mp {

// frames x joints
using PositionSeq = std::vector<std::vector<Vec3>>;
// frames x joints, local rotations with the root entry global (Pose convention)
using RotationSeq = std::vector<std::vector<Mat3>>;

struct MetricReport {
    double mpjpe = 0;        // mm
    double pa_mpjpe = 0;     // mm
    double accel = 0;        // mm/frame^2
    double accel_err = 0;    // mm/frame^2
    double global_quat = 0;  // dimensionless
};

std::string to_json(const MetricReport& r);

// Root-translation alignment per frame, then mean distance over the non-root
// joints, in millimeters.
double mpjpe(const PositionSeq& pred, const PositionSeq& gt, int root = 0);

// Per-frame similarity Procrustes (rotation + translation + scale) fitted on
// all joints, then mean distance over the non-root joints, in millimeters.
// Frames whose joints are collinear are rejected.
double pa_mpjpe(const PositionSeq& pred, const PositionSeq& gt, int root = 0);

// Second differences a_t = p_{t+1} - 2 p_t + p_{t-1}.  Returns
// (mean |a| of pred, mean |a_pred - a_gt|) in mm/frame^2.  Needs T >= 3.
std::pair<double, double> accel_metrics(const PositionSeq& pred, const PositionSeq& gt);

// Composes locals to global rotations along the tree, converts to
// hemisphere-canonical quaternions, mean L2 distance over frames and joints.
double global_quat_loss(const RotationSeq& pred, const RotationSeq& gt, const Skeleton& s);

// FK on both pose tracks, then the full report.
MetricReport evaluate(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                      const Skeleton& s);

}  // namespace mp
