#pragma once

#include "hoa/geometry.hpp"

#include <vector>

namespace hoa {

// Minimum camera-space depth for a point to be considered in front of the
// camera; anything closer is flagged invalid and excluded from losses.
inline constexpr double kMinCameraDepth = 1e-6;

struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
  int width = 0, height = 0;
  RigidTransform extrinsic;  // world -> camera
  double depth_scale = 1e-4;  // meters per stored depth unit

  void validate() const;

  // Camera scaled down by an integer factor (intrinsics divided, size
  // rounded down).
  Camera downscaled(int factor) const;
};

struct Projection {
  double u = 0, v = 0;   // pixel coordinates
  double z = 0;          // camera-space depth (meters)
  bool valid = false;    // false when z <= kMinCameraDepth
  // d(u,v)/d(world point), rows u then v.
  Eigen::Matrix<double, 2, 3> jac;
};

// Pinhole projection after the extrinsic transform. `with_jacobian`
// requests d(u,v)/d(point) in world coordinates.
Projection project(const Vec3& world_point, const Camera& cam,
                   bool with_jacobian = false);

// Camera-space ray direction through pixel (u, v), z component = 1.
Vec3 pixelRay(double u, double v, const Camera& cam);

struct CameraRig {
  std::vector<Camera> cameras;
  int reference = 0;

  int count() const { return static_cast<int>(cameras.size()); }
  void validate() const;
};

}  // namespace hoa
