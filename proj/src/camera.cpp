#include "hoa/camera.hpp"

#include "hoa/errors.hpp"

namespace hoa {

void Camera::validate() const {
  if (fx <= 0 || fy <= 0) throw InvalidInput("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("camera resolution must be positive");
  if (depth_scale <= 0) throw InvalidInput("camera depth_scale must be positive");
  const Mat3 rrt = extrinsic.rot * extrinsic.rot.transpose();
  if ((rrt - Mat3::Identity()).norm() > 1e-6)
    throw InvalidInput("camera extrinsic rotation is not orthonormal");
}

Camera Camera::downscaled(int factor) const {
  if (factor <= 1) return *this;
  Camera c = *this;
  c.fx /= factor;
  c.fy /= factor;
  c.cx /= factor;
  c.cy /= factor;
  c.width = width / factor;
  c.height = height / factor;
  return c;
}

Projection project(const Vec3& world_point, const Camera& cam,
                   bool with_jacobian) {
  if (!world_point.allFinite()) throw InvalidInput("non-finite point in project");
  const Vec3 p = cam.extrinsic.apply(world_point);
  Projection out;
  out.z = p.z();
  if (p.z() <= kMinCameraDepth) {
    out.valid = false;
    return out;
  }
  out.valid = true;
  out.u = cam.fx * p.x() / p.z() + cam.cx;
  out.v = cam.fy * p.y() / p.z() + cam.cy;
  if (with_jacobian) {
    Eigen::Matrix<double, 2, 3> dcam;
    const double iz = 1.0 / p.z();
    dcam << cam.fx * iz, 0, -cam.fx * p.x() * iz * iz,
            0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
    out.jac = dcam * cam.extrinsic.rot;
  }
  return out;
}

Vec3 pixelRay(double u, double v, const Camera& cam) {
  return {(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
}

void CameraRig::validate() const {
  if (cameras.empty()) throw InvalidInput("camera rig is empty");
  if (reference < 0 || reference >= count())
    throw InvalidInput("camera rig reference index out of range");
  for (const auto& c : cameras) c.validate();
  const auto& ref = cameras[reference].extrinsic;
  if ((ref.rot - Mat3::Identity()).norm() > 1e-9 || ref.trans.norm() > 1e-9)
    throw InvalidInput("reference camera extrinsic must be identity");
}

}  // namespace hoa
