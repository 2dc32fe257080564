#include "liftkit/skeleton.hpp"

#include <cmath>

#include "liftkit/errors.hpp"

namespace liftkit {

void SkeletonSpec::validate() const {
    const int J = joint_count;
    if (J <= 0) throw ConfigError("skeleton: joint_count must be positive");
    if (static_cast<int>(parents.size()) != J ||
        static_cast<int>(bone_lengths.size()) != J ||
        static_cast<int>(mirror_map.size()) != J)
        throw ConfigError("skeleton: field sizes disagree with joint_count");
    if (parents[0] != kNoParent)
        throw ConfigError("skeleton: joint 0 must be the root");
    for (int j = 1; j < J; ++j) {
        if (parents[j] == kNoParent)
            throw ConfigError("skeleton: more than one root");
        if (parents[j] < 0 || parents[j] >= J)
            throw ConfigError("skeleton: parent index out of range");
        if (parents[j] >= j)
            throw ConfigError("skeleton: parents must precede children");
        if (!(bone_lengths[j] > 0.0) || !std::isfinite(bone_lengths[j]))
            throw ConfigError("skeleton: bone lengths must be positive");
    }
    for (int j = 0; j < J; ++j) {
        const int m = mirror_map[j];
        if (m < 0 || m >= J || mirror_map[m] != j)
            throw ConfigError("skeleton: mirror_map is not an involution");
    }
}

namespace {

Coords3 normalized_rows(std::initializer_list<std::array<double, 3>> rows) {
    Coords3 out(static_cast<int>(rows.size()), 3);
    int i = 0;
    for (const auto& r : rows) {
        Eigen::RowVector3d v(r[0], r[1], r[2]);
        const double n = v.norm();
        out.row(i++) = n > 0 ? (v / n).eval() : v;
    }
    return out;
}

}  // namespace

SkeletonPreset humanoid8() {
    SkeletonPreset p;
    p.spec.name = "humanoid8";
    p.spec.joint_count = 8;
    //                0 pelvis  1 spine  2 chest  3 head  4 larm  5 rarm  6 lleg  7 rleg
    p.spec.parents      = {kNoParent, 0, 1, 2, 2, 2, 0, 0};
    p.spec.bone_lengths = {0.0, 240.0, 240.0, 220.0, 540.0, 540.0, 830.0, 830.0};
    p.spec.mirror_map   = {0, 1, 2, 3, 5, 4, 7, 6};
    p.rest.directions = normalized_rows({{0, 0, 0},
                                         {0, 1, 0},
                                         {0, 1, 0},
                                         {0, 1, 0},
                                         {1, -0.15, 0.05},
                                         {-1, -0.15, 0.05},
                                         {0.3, -1, 0.05},
                                         {-0.3, -1, 0.05}});
    p.spec.validate();
    return p;
}

SkeletonPreset humanoid17() {
    SkeletonPreset p;
    p.spec.name = "humanoid17";
    p.spec.joint_count = 17;
    // 0 pelvis, 1-3 right leg, 4-6 left leg, 7 spine, 8 thorax, 9 neck, 10 head,
    // 11-13 left arm, 14-16 right arm
    p.spec.parents = {kNoParent, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    p.spec.bone_lengths = {0.0, 130.0, 450.0, 440.0, 130.0, 450.0, 440.0,
                           250.0, 250.0, 120.0, 120.0,
                           150.0, 280.0, 250.0, 150.0, 280.0, 250.0};
    p.spec.mirror_map = {0, 4, 5, 6, 1, 2, 3, 7, 8, 9, 10, 14, 15, 16, 11, 12, 13};
    p.rest.directions = normalized_rows({{0, 0, 0},
                                         {-1, 0, 0},
                                         {0, -1, 0.05},
                                         {0, -1, 0.1},
                                         {1, 0, 0},
                                         {0, -1, 0.05},
                                         {0, -1, 0.1},
                                         {0, 1, 0},
                                         {0, 1, 0},
                                         {0, 1, 0},
                                         {0, 1, 0},
                                         {1, 0, 0},
                                         {1, -0.4, 0.05},
                                         {1, -0.5, 0.1},
                                         {-1, 0, 0},
                                         {-1, -0.4, 0.05},
                                         {-1, -0.5, 0.1}});
    p.spec.validate();
    return p;
}

SkeletonPreset skeleton_preset(const std::string& name) {
    if (name == "humanoid8") return humanoid8();
    if (name == "humanoid17") return humanoid17();
    throw ConfigError("unknown skeleton preset: " + name);
}

}  // namespace liftkit
