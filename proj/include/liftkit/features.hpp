#pragma once

#include <cstdint>

#include "liftkit/pose.hpp"
#include "liftkit/types.hpp"

namespace liftkit {

// Conditioning descriptor of shape (L+1) x J x d, float32. Channels 0..L-1 are
// context levels, channel L is the 2D-pose channel. Stored as a ((L+1)*J) x d
// matrix, row index = channel * J + joint.
struct ConditioningFeatures {
    int levels = 0;  // L
    int joints = 0;  // J
    int dim = 0;     // d
    Matf data;       // ((L+1)*J) x d

    int channels() const { return levels + 1; }
    int row(int channel, int joint) const { return channel * joints + joint; }

    static ConditioningFeatures zeros(int L, int J, int d);
    void check_shape() const;  // throws ConfigError on inconsistency
};

struct FeatureConfig {
    int levels = 4;                  // L
    int dim = 32;                    // d
    std::uint64_t lift_seed = 7777;  // fixed seed for the pose-channel lift matrix
    double quant_step = 0.1;         // context sees coarsely quantized 2D coordinates
    double depth_scale_mm = 600.0;   // depth cue compression scale
};

// Synthetic stand-in for the visual backbone. The pose channel is a fixed
// linear lift of the 2D pose; context channels are multi-resolution random
// sinusoid features keyed by (context_seed, level), coarse in 2D and, on the
// generator path, carrying a bounded depth cue.
class FeatureExtractor {
public:
    explicit FeatureExtractor(const FeatureConfig& cfg);

    // The standalone operation: context channels are functions of this pose2d
    // only (no depth information available).
    ConditioningFeatures extract(const Pose2D& pose2d, std::uint64_t context_seed) const;

    // Generator path: pose channel from the noisy detected 2D pose, context
    // channels from the clean projection plus a per-joint depth cue (mm).
    ConditioningFeatures extract_with_context(const Pose2D& detected2d,
                                              const Pose2D& clean2d,
                                              const Vecd& depth_mm,
                                              std::uint64_t context_seed) const;

    const FeatureConfig& config() const { return cfg_; }
    const Matf& lift_matrix() const { return lift_; }  // d x 2

private:
    void fill_pose_channel(ConditioningFeatures& f, const Pose2D& pose2d) const;
    void fill_context_channels(ConditioningFeatures& f, const Pose2D& pose2d,
                               const Vecd& depth_mm, std::uint64_t context_seed) const;

    FeatureConfig cfg_;
    Matf lift_;  // d x 2, zero bias
};

}  // namespace liftkit
