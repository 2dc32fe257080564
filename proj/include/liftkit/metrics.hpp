#pragma once

#include <map>
#include <string>
#include <vector>

#include "liftkit/pose.hpp"

namespace liftkit {

// Mean per-joint Euclidean distance, millimeters.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

// Optimal similarity transform s R pred + t (scale > 0, det R = +1) minimizing
// the Frobenius distance to gt. Throws NumericalError when the point set is
// degenerate (all joints coincident).
Pose3D procrustes_align(const Pose3D& pred, const Pose3D& gt);

double p_mpjpe(const Pose3D& pred, const Pose3D& gt);

// Fraction of joints with error <= threshold, as a percentage.
double pck(const Pose3D& pred, const Pose3D& gt, double threshold_mm);

// Mean of pck/100 over thresholds 0, 5, ..., 150 mm (31 points).
double auc(const Pose3D& pred, const Pose3D& gt);

struct MetricValues {
    double mpjpe_mm = 0.0;
    double p_mpjpe_mm = 0.0;
    double pck150 = 0.0;
    double auc = 0.0;
};

struct MetricReport {
    MetricValues overall;
    std::map<std::string, MetricValues> per_action;
    long frame_count = 0;
};

struct EvalFrame {
    std::string id;
    Pose3D pred;
    Pose3D gt;
    std::string action_tag;
};

// Frames averaged uniformly; per-action numbers averaged uniformly within each
// action. Throws ConfigError on id/count mismatch upstream of this call.
MetricReport evaluate(const std::vector<EvalFrame>& frames, bool group_by_action);

// File-level wrapper: matches prediction records to ground-truth samples by id.
MetricReport evaluate_files(const std::string& pred_path, const std::string& gt_path,
                            bool group_by_action);

std::string report_to_json(const MetricReport& report);
std::string report_to_csv(const MetricReport& report);

}  // namespace liftkit
