#pragma once

#include <Eigen/Core>

namespace liftkit {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matd = MatX<double>;
using Matf = MatX<float>;
using Vecd = VecX<double>;
using Vecf = VecX<float>;

// J x 3 joint coordinate block, millimeters unless stated otherwise
using Coords3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
// J x 2 normalized image coordinates
using Coords2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

}  // namespace liftkit
