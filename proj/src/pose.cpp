#include "liftkit/pose.hpp"

#include "liftkit/errors.hpp"

namespace liftkit {

Pose3D Pose3D::root_relative(const Coords3& raw) {
    Pose3D p;
    p.coords = raw;
    p.coords.rowwise() -= raw.row(0);
    return p;
}

void Pose3D::check_finite(const char* what) const {
    if (!coords.allFinite()) throw NumericalError(what, "non-finite coordinate");
}

void Pose2D::check_finite(const char* what) const {
    if (!coords.allFinite()) throw NumericalError(what, "non-finite coordinate");
}

}  // namespace liftkit
