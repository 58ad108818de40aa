#pragma once

#include "hoa/camera.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/rng.hpp"

namespace testutil {

using namespace hoa;

inline const HandModel& syntheticHand() {
  static const HandModel model = HandModel::makeSynthetic();
  return model;
}

// Arbitrary pose, not necessarily within joint limits.
inline HandPose randomPose(Rng& rng, double angle_scale = 0.4) {
  HandPose p;
  for (int i = 0; i < kNumFingerAngles; ++i) p.angles[i] = angle_scale * rng.normal();
  p.global_rot = 0.8 * rng.normalVec3();
  p.global_trans = 0.2 * rng.normalVec3();
  return p;
}

// Pose sampled strictly inside the joint-limit box.
inline HandPose feasiblePose(const HandModel& model, Rng& rng,
                             double spread = 0.35) {
  HandPose p;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double lo = model.limits_lo[i], hi = model.limits_hi[i];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    p.angles[i] = mid + spread * half * (2.0 * rng.uniform() - 1.0);
  }
  p.global_rot = 0.5 * rng.normalVec3();
  p.global_trans = Vec3(0.05 * rng.normal(), 0.05 * rng.normal(),
                        0.45 + 0.1 * rng.uniform());
  return p;
}

inline Camera simpleCamera(int w = 64, int h = 64, double f = 80.0) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

}  // namespace testutil
