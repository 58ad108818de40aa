#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hoa/geometry.hpp"
#include "hoa/rng.hpp"
#include "oracles.hpp"

using namespace hoa;

TEST_CASE("rodrigues matches quaternion rotation") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w = rng.normalVec3();
    const Mat3 r = rodrigues(w);
    const Mat3 ref = oracle::rot4(w).block<3, 3>(0, 0);
    CHECK((r - ref).norm() < 1e-12);
  }
  CHECK((rodrigues(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("rodrigues log map round trips") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Vec3 w = rng.normalVec3();
    if (w.norm() > M_PI) w *= (M_PI - 1e-3) / w.norm();
    const Vec3 back = rodriguesInverse(rodrigues(w));
    CHECK((w - back).norm() < 1e-9);
  }
  // Tiny angles.
  const Vec3 tiny(1e-9, -2e-9, 3e-10);
  CHECK((rodriguesInverse(rodrigues(tiny)) - tiny).norm() < 1e-15);
  // Near pi.
  Rng rng2(3);
  for (int i = 0; i < 20; ++i) {
    const Vec3 axis = rng2.unitVec3();
    const Vec3 w = axis * (M_PI - 1e-4);
    const Vec3 back = rodriguesInverse(rodrigues(w));
    CHECK((rodrigues(back) - rodrigues(w)).norm() < 1e-6);
  }
}

TEST_CASE("rodrigues jacobian matches finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 w = trial == 0 ? Vec3::Zero() : Vec3(rng.normalVec3());
    const auto jac = rodriguesJacobian(w);
    for (int k = 0; k < 3; ++k) {
      Vec3 wp = w, wm = w;
      wp[k] += 1e-6;
      wm[k] -= 1e-6;
      const Mat3 fd = (rodrigues(wp) - rodrigues(wm)) / 2e-6;
      CHECK((jac[k] - fd).norm() < 1e-7);
    }
  }
}

TEST_CASE("rigid transform compose and inverse") {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    RigidTransform a{rodrigues(rng.normalVec3()), rng.normalVec3()};
    RigidTransform b{rodrigues(rng.normalVec3()), rng.normalVec3()};
    const Vec3 p = rng.normalVec3();
    CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
    const RigidTransform id = a.compose(a.inverse());
    CHECK((id.rot - Mat3::Identity()).norm() < 1e-12);
    CHECK(id.trans.norm() < 1e-12);
  }
}
