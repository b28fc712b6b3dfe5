#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace softgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Nodal arrays are stored as 3 x N column-major matrices: column i is node i.
using NodalField = Eigen::Matrix<double, 3, Eigen::Dynamic>;

}  // namespace softgrasp
