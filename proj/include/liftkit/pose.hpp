#pragma once

#include "liftkit/types.hpp"

namespace liftkit {

// Root-relative 3D pose, millimeters. Row 0 is the root and sits at the origin
// once normalized.
struct Pose3D {
    Coords3 coords;

    int joints() const { return static_cast<int>(coords.rows()); }

    // Subtract the root joint from every row.
    static Pose3D root_relative(const Coords3& raw);

    // Throws NumericalError if any value is non-finite.
    void check_finite(const char* what = "pose3d") const;
};

// 2D pose in normalized image units, nominally [-1, 1].
struct Pose2D {
    Coords2 coords;

    int joints() const { return static_cast<int>(coords.rows()); }
    void check_finite(const char* what = "pose2d") const;
};

}  // namespace liftkit
