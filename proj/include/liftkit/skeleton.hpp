#pragma once

#include <string>
#include <vector>

#include "liftkit/types.hpp"

namespace liftkit {

constexpr int kNoParent = -1;

// Articulated skeleton: a tree of J joints rooted at index 0, with fixed bone
// lengths (millimeters) and a left/right mirror pairing used by flip
// augmentation.
struct SkeletonSpec {
    std::string name;
    int joint_count = 0;
    std::vector<int> parents;          // parents[0] == kNoParent
    std::vector<double> bone_lengths;  // bone_lengths[j] = |joint j - parent|, root entry 0
    std::vector<int> mirror_map;       // involutive permutation

    void validate() const;  // throws ConfigError on any broken invariant
};

// Unit bone directions in the parent frame, one row per joint (root row zero).
// Not part of the spec proper; the generator needs a rest pose to perturb.
struct SkeletonRest {
    Coords3 directions;
};

struct SkeletonPreset {
    SkeletonSpec spec;
    SkeletonRest rest;
};

// J=8 desk-scale humanoid and J=17 full-scale humanoid.
SkeletonPreset humanoid8();
SkeletonPreset humanoid17();
SkeletonPreset skeleton_preset(const std::string& name);

}  // namespace liftkit
