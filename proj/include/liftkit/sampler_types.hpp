#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftkit/types.hpp"

namespace liftkit {

struct SamplerConfig {
    int hypotheses = 20;          // H
    int steps = 20;               // K
    std::string variant = "ddim"; // "ddim" or "literal"
    std::uint64_t seed = 0;
    int total_steps = 0;          // T of the schedule used (informational)
};

// H candidate poses for one frame. Poses are root-relative millimeters.
struct HypothesisSet {
    std::string frame_id;
    std::vector<Coords3> poses;
    SamplerConfig config;

    int count() const { return static_cast<int>(poses.size()); }
    int joints() const { return poses.empty() ? 0 : static_cast<int>(poses.front().rows()); }
};

}  // namespace liftkit
