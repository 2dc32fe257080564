#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftkit/features.hpp"
#include "liftkit/pose.hpp"
#include "liftkit/skeleton.hpp"

namespace liftkit {

struct PoseSample {
    std::string sample_id;
    std::string action_tag;  // empty = untagged
    Pose3D pose3d;           // ground truth, root-relative, mm
    Pose2D pose2d;           // detected 2D pose, normalized units
    ConditioningFeatures features;
};

// Pinhole camera on the +z axis looking at the root joint.
struct CameraModel {
    double focal = 2.2;          // normalized focal length
    double distance_mm = 4000.0; // camera-to-root distance

    void validate() const;  // throws ConfigError
    Pose2D project(const Pose3D& pose) const;
};

struct GeneratorConfig {
    int count = 1;
    std::uint64_t seed = 0;
    double noise_std_2d = 0.0;      // isotropic gaussian noise on the 2D pose
    CameraModel camera;
    double max_angle_deg = 55.0;    // joint rotation limit
    int action_count = 1;           // >1 assigns cyclic action tags a0..a{n-1}
    std::string id_prefix = "s";
    FeatureConfig features;
    std::uint64_t context_seed = 99;
    bool context_depth_cue = true;  // context channels see a depth cue from the 3D pose
};

// Forward kinematics with random joint rotations inside the configured limit.
// Bone lengths of every generated pose match the spec exactly; the 2D pose is
// the pinhole projection plus noise. Pure function of (spec, rest, config).
std::vector<PoseSample> generate_synthetic_dataset(const SkeletonSpec& spec,
                                                   const SkeletonRest& rest,
                                                   const GeneratorConfig& cfg);

// Mirror augmentation: negate x, permute joints by spec.mirror_map, permute the
// feature tensor's joint axis. Involutive.
PoseSample horizontal_flip(const PoseSample& sample, const SkeletonSpec& spec);

// Mean pose over a dataset (the constant-predictor baseline).
Pose3D mean_pose(const std::vector<PoseSample>& samples);

}  // namespace liftkit
