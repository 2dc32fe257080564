#pragma once

#include <optional>
#include <string>
#include <vector>

#include "liftkit/pose.hpp"
#include "liftkit/sampler_types.hpp"

namespace liftkit {

enum class Strategy { kRandom, kBest, kAverage, kMedian, kBestJoint };

Strategy strategy_from_string(const std::string& s);  // "R" | "B" | "A" | "M" | "Bjoint"
std::string strategy_to_string(Strategy s);

struct AggregationResult {
    Pose3D pose;
    Strategy strategy = Strategy::kAverage;
    std::optional<int> chosen_index;      // present for R and B
    std::optional<double> confidence;     // variance score, absent when H < 2
};

// Per-coordinate arithmetic mean over the H hypotheses.
Pose3D aggregate_average(const HypothesisSet& hs);

// Per-coordinate order statistics: central element for odd H, midpoint of the
// two central elements for even H.
Pose3D aggregate_median(const HypothesisSet& hs);

// Uniform index pick, deterministic per seed.
AggregationResult select_random(const HypothesisSet& hs, std::uint64_t seed);

// Oracle: hypothesis minimizing MPJPE against the ground truth.
AggregationResult select_best(const HypothesisSet& hs, const Pose3D& gt);

// Joint-level oracle: each joint taken from the hypothesis with the smallest
// error at that joint; lower bound for any selection scheme.
Pose3D select_best_jointwise(const HypothesisSet& hs, const Pose3D& gt);

// Mean over the 3*J coordinates of the unbiased (H-1 divisor) per-coordinate
// variance across hypotheses. Lower = more confident. Absent for H < 2.
std::optional<double> confidence(const HypothesisSet& hs);

// Applies a strategy and attaches the confidence score.
AggregationResult aggregate(const HypothesisSet& hs, Strategy strategy, std::uint64_t seed,
                            const Pose3D* gt = nullptr);

struct ConfidenceFilterResult {
    std::vector<size_t> kept;   // indices of retained frames, original order
    double kept_mpjpe = 0.0;
    double full_mpjpe = 0.0;
};

// Keeps the ceil(recall * N) frames with the lowest variance score (ties by
// frame order) and reports aggregate MPJPE of the per-frame aggregated poses
// on the kept subset vs all frames.
ConfidenceFilterResult confidence_filter(
    const std::vector<std::pair<const HypothesisSet*, const Pose3D*>>& frames,
    double recall, Strategy strategy = Strategy::kMedian, std::uint64_t seed = 0);

}  // namespace liftkit
