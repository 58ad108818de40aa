#include "hoa/geometry.hpp"

#include <cmath>

namespace hoa {

Mat3 crossMatrix(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rodrigues(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    // Second-order expansion keeps the result exact to machine precision
    // for tiny angles and smooth across zero.
    const Mat3 k = crossMatrix(omega);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const Vec3 axis = omega / theta;
  const Mat3 k = crossMatrix(axis);
  return Mat3::Identity() + std::sin(theta) * k +
         (1.0 - std::cos(theta)) * k * k;
}

Vec3 rodriguesInverse(const Mat3& rot) {
  const double tr = rot.trace();
  const double cos_theta = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  Vec3 w(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
  if (theta < 1e-7) {
    return 0.5 * w;  // R ~ I + [w]_x
  }
  if (theta > M_PI - 1e-5) {
    // Near pi the off-diagonal difference vanishes; recover the axis from
    // the symmetric part R + I = 2(axis axis^T - ...) structure.
    Mat3 s = 0.5 * (rot + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(s(0, 0), 0.0)),
              std::sqrt(std::max(s(1, 1), 0.0)),
              std::sqrt(std::max(s(2, 2), 0.0)));
    // Fix signs using the largest component.
    int i = 0;
    axis.maxCoeff(&i);
    if (axis[i] < 1e-12) return Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
      if (j == i) continue;
      const double sij = 0.5 * (rot(i, j) + rot(j, i));
      axis[j] = sij / (2.0 * axis[i]) * 2.0;
    }
    axis.normalize();
    // Resolve overall sign with the skew part if it is not fully degenerate.
    if (w.norm() > 1e-12 && axis.dot(w) < 0) axis = -axis;
    return axis * theta;
  }
  return w * (theta / (2.0 * std::sin(theta)));
}

std::array<Mat3, 3> rodriguesJacobian(const Vec3& omega) {
  std::array<Mat3, 3> jac;
  const double theta2 = omega.squaredNorm();
  if (theta2 < 1e-14) {
    for (int k = 0; k < 3; ++k) jac[k] = crossMatrix(Vec3::Unit(k));
    return jac;
  }
  const Mat3 rot = rodrigues(omega);
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = Vec3::Unit(k);
    const Vec3 v = omega.cross((Mat3::Identity() - rot) * e);
    jac[k] = ((omega[k] * crossMatrix(omega) + crossMatrix(v)) / theta2) * rot;
  }
  return jac;
}

}  // namespace hoa
