#pragma once

#include <Eigen/Dense>

#include <array>

namespace hoa {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Rotation matrix from an axis-angle vector (direction = axis, norm = angle).
Mat3 rodrigues(const Vec3& omega);

// Axis-angle vector from a rotation matrix (log map). Angle in [0, pi].
Vec3 rodriguesInverse(const Mat3& rot);

// dR/d(omega_k) for k = 0,1,2 at the given axis-angle vector.
// Uses the closed form of Gallego & Yezzi; exact at omega = 0.
std::array<Mat3, 3> rodriguesJacobian(const Vec3& omega);

Mat3 crossMatrix(const Vec3& v);

// Rigid transform y = R x + t.
struct RigidTransform {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rot * p + trans; }

  RigidTransform compose(const RigidTransform& other) const {
    // (*this) after other: y = R1 (R2 x + t2) + t1
    return {rot * other.rot, rot * other.trans + trans};
  }

  RigidTransform inverse() const {
    return {rot.transpose(), -(rot.transpose() * trans)};
  }
};

}  // namespace hoa
