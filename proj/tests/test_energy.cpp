#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hoa/energy.hpp"
#include "hoa/shapes.hpp"
#include "hoa/errors.hpp"
#include "hoa/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hoa;

namespace {

PosedMesh boxMesh(const Vec3& center, const Vec3& half) {
  return posedFromMesh(makeBox(half), {Mat3::Identity(), center});
}

FrameObservation obsFromRaster(const HardRaster& hr) {
  FrameObservation obs;
  obs.mask = hr.labels;
  obs.depth = ImageD(hr.depth.width, hr.depth.height, 0.0);
  for (size_t i = 0; i < hr.depth.data.size(); ++i) {
    obs.depth.data[i] = std::isfinite(hr.depth.data[i]) ? hr.depth.data[i] : 0.0;
  }
  obs.keypoints = MatX::Zero(21, 3);
  return obs;
}

}  // namespace

TEST_CASE("tukey: zero, saturation, small-residual quadratic limit") {
  CHECK(tukey(0.0, 0.02) == 0.0);
  CHECK(tukey(0.02, 0.02) == doctest::Approx(0.02 * 0.02 / 6.0));
  CHECK(tukey(5.0, 0.02) == 0.02 * 0.02 / 6.0);
  CHECK(tukey(-5.0, 0.02) == 0.02 * 0.02 / 6.0);
  // rho(r) / (r^2/2) -> 1 as r -> 0, checked at r = c/100.
  const double c = 0.02, r = c / 100.0;
  CHECK(std::abs(tukey(r, c) / (r * r / 2.0) - 1.0) < 1e-3);
  // Derivative consistency.
  for (double r2 : {0.001, 0.01, 0.019, 0.021}) {
    const double fd = (tukey(r2 + 1e-8, c) - tukey(r2 - 1e-8, c)) / 2e-8;
    CHECK(std::abs(tukeyDerivative(r2, c) - fd) < 1e-6);
  }
}

TEST_CASE("e_mask: exact reproduction, full-cover channel, resolution check") {
  Camera cam = testutil::simpleCamera(32, 32, 40);
  const PosedMesh hand = boxMesh(Vec3(-0.0423, 0.0031, 0.5), Vec3(0.05, 0.05, 0.02));
  const PosedMesh obj = boxMesh(Vec3(0.0811, -0.0017, 0.6), Vec3(0.05, 0.05, 0.02));

  SUBCASE("render reproducing the mask gives ~0 at high sharpness") {
    const HardRaster hr = hardRasterize(hand, obj, cam);
    const FrameObservation obs = obsFromRaster(hr);
    const RenderOutput ro = render(hand, obj, cam, 800.0);
    CHECK(eMask(obs, ro) < 1e-3);
  }

  SUBCASE("all-background mask vs full unit cover: 1.0 per class channel") {
    // A giant quad per class would overlap; exercise the channels one at a
    // time so each covers the frame alone.
    TriMesh big;
    big.vertices.resize(3, 3);
    big.vertices << -30, -30, 0.5, 30, -30, 0.5, 0, 45, 0.5;
    big.faces.resize(1, 3);
    big.faces << 0, 1, 2;
    const PosedMesh cover = posedFromMesh(big, RigidTransform::identity());
    FrameObservation obs;
    obs.mask = ImageU8(32, 32, kLabelBackground);
    obs.depth = ImageD(32, 32, 0.0);
    obs.keypoints = MatX::Zero(21, 3);
    const RenderOutput as_hand = render(cover, {}, cam, 3000.0);
    CHECK(eMask(obs, as_hand) == doctest::Approx(1.0).epsilon(1e-3));
    const RenderOutput as_obj = render({}, cover, cam, 3000.0);
    CHECK(eMask(obs, as_obj) == doctest::Approx(1.0).epsilon(1e-3));
  }

  SUBCASE("resolution mismatch rejected") {
    FrameObservation obs;
    obs.mask = ImageU8(16, 16, 0);
    obs.depth = ImageD(16, 16, 0.0);
    obs.keypoints = MatX::Zero(21, 3);
    const RenderOutput ro = render(hand, obj, cam, 40.0);
    CHECK_THROWS_AS(eMask(obs, ro), InvalidInput);
  }
}

TEST_CASE("e_dpt: exact zero, uniform offset closed form, monotone line search") {
  Camera cam = testutil::simpleCamera(32, 32, 40);

  SUBCASE("render equals observation -> 0") {
    const PosedMesh hand = boxMesh(Vec3(0, 0, 0.5), Vec3(0.06, 0.06, 0.02));
    const HardRaster hr = hardRasterize(hand, {}, cam);
    const FrameObservation obs = obsFromRaster(hr);
    const RenderOutput ro = render(hand, {}, cam, 40.0);
    CHECK(eDpt(obs, ro, 0.02) == 0.0);
  }

  SUBCASE("uniform 5mm depth offset matches the closed form") {
    // Fronto-parallel square: shifting along z changes depth but not the
    // silhouette, so the active set is identical.
    const PosedMesh near = boxMesh(Vec3(0, 0, 0.5), Vec3(0.06, 0.06, 0.015));
    const PosedMesh far = boxMesh(Vec3(0, 0, 0.505), Vec3(0.06, 0.06, 0.015));
    const HardRaster hr = hardRasterize(far, {}, cam);
    const FrameObservation obs = obsFromRaster(hr);
    const RenderOutput ro = render(near, {}, cam, 40.0);
    CHECK(eDpt(obs, ro, 0.02) == doctest::Approx(tukey(0.005, 0.02)).epsilon(1e-9));
  }

  SUBCASE("energy decreases along the line from 2cm offset to truth") {
    const Vec3 truth(0.01, -0.01, 0.55);
    const PosedMesh gt_mesh = boxMesh(truth, Vec3(0.05, 0.05, 0.03));
    const HardRaster hr = hardRasterize({}, gt_mesh, cam);
    const FrameObservation obs = obsFromRaster(hr);
    const Vec3 offset(0, 0, 0.02);  // axial: same silhouette, pure depth shift
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= 10; ++step) {
      const double lam = step / 10.0;
      const PosedMesh mesh = boxMesh(truth + (1.0 - lam) * offset, Vec3(0.05, 0.05, 0.03));
      const RenderOutput ro = render({}, mesh, cam, 40.0);
      const double e = eDpt(obs, ro, 0.02);
      CHECK(e <= prev + 1e-12);
      prev = e;
    }
    CHECK(prev < 1e-12);
  }
}

TEST_CASE("e_j2d: exact projections, forced arithmetic, zero confidence") {
  Camera cam = testutil::simpleCamera(64, 64, 80);
  Rng rng(12);
  MatX joints(21, 3);
  for (int i = 0; i < 21; ++i) {
    joints.row(i) = Vec3(0.1 * rng.normal(), 0.1 * rng.normal(),
                          0.5 + 0.2 * rng.uniform())
                        .transpose();
  }
  FrameObservation obs;
  obs.mask = ImageU8(64, 64, 0);
  obs.depth = ImageD(64, 64, 0.0);
  obs.keypoints.resize(21, 3);
  for (int i = 0; i < 21; ++i) {
    const Projection p = project(joints.row(i).transpose(), cam);
    obs.keypoints.row(i) << p.u, p.v, 1.0;
  }
  CHECK(eJ2d(obs, cam, joints) == doctest::Approx(0.0));

  // Single joint offset by 3 px with unit confidence -> 9.
  FrameObservation one = obs;
  one.keypoints.col(2).setZero();
  one.keypoints(4, 2) = 1.0;
  one.keypoints(4, 0) += 3.0;
  CHECK(eJ2d(one, cam, joints) == doctest::Approx(9.0));

  // All confidences zero -> 0 regardless of pose.
  FrameObservation zero = obs;
  zero.keypoints.col(2).setZero();
  MatX other = joints;
  other.array() += 0.3;
  CHECK(eJ2d(zero, cam, other) == 0.0);

  // Behind-camera joints are excluded with a count.
  MatX behind = joints;
  behind(2, 2) = -1.0;
  int count = 0;
  eJ2d(obs, cam, behind, nullptr, &count);
  CHECK(count == 1);

  // Gradient check.
  MatX dj;
  const double e0 = eJ2d(one, cam, joints, &dj);
  (void)e0;
  for (int k = 0; k < 3; ++k) {
    MatX jp = joints, jm = joints;
    jp(4, k) += 1e-7;
    jm(4, k) -= 1e-7;
    const double fd = (eJ2d(one, cam, jp) - eJ2d(one, cam, jm)) / 2e-7;
    CHECK(std::abs(dj(4, k) - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("e_3d: exact vertices, forced distance, brute-force oracle") {
  const PosedMesh hand = boxMesh(Vec3(0, 0, 0.5), Vec3(0.05, 0.04, 0.03));
  const PosedMesh obj = boxMesh(Vec3(0.1, 0, 0.6), Vec3(0.06, 0.05, 0.04));

  SUBCASE("cloud sampled at vertices -> 0") {
    LabeledCloud cloud;
    cloud.points.resize(10, 3);
    for (int i = 0; i < 5; ++i) cloud.points.row(i) = hand.vertices.row(i % 8);
    for (int i = 5; i < 10; ++i) cloud.points.row(i) = obj.vertices.row(i % 8);
    cloud.labels.assign(10, kLabelHand);
    for (int i = 5; i < 10; ++i) cloud.labels[i] = kLabelObject;
    CHECK(e3d(cloud, hand, obj) == doctest::Approx(0.0));
  }

  SUBCASE("single point 2mm away -> 4e-6") {
    LabeledCloud cloud;
    cloud.points.resize(1, 3);
    cloud.points.row(0) = hand.vertices.row(3) + Vec3(0.002, 0, 0).transpose();
    // Ensure vertex 3 is really the nearest to the probe.
    cloud.labels.assign(1, kLabelHand);
    const double e = e3d(cloud, hand, obj);
    CHECK(e == doctest::Approx(4e-6).epsilon(1e-9));
  }

  SUBCASE("matches brute-force correspondences on 100 points") {
    Rng rng(77);
    LabeledCloud cloud;
    cloud.points.resize(100, 3);
    cloud.labels.resize(100);
    for (int i = 0; i < 100; ++i) {
      const bool is_hand = rng.uniform() < 0.5;
      const Vec3 base = is_hand ? Vec3(0, 0, 0.5) : Vec3(0.1, 0, 0.6);
      cloud.points.row(i) = (base + 0.08 * rng.normalVec3()).transpose();
      cloud.labels[i] = is_hand ? kLabelHand : kLabelObject;
    }
    double ref = 0;
    for (int i = 0; i < 100; ++i) {
      const PosedMesh& mesh = cloud.labels[i] == kLabelHand ? hand : obj;
      const auto idx = oracle::bruteNearest(cloud.points.row(i), mesh.vertices);
      ref += (cloud.points.row(i) - mesh.vertices.row(idx[0])).squaredNorm();
    }
    CHECK(e3d(cloud, hand, obj) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("e_phy: outside, forced penetration value, monotone push-out") {
  // Object: axis-aligned box; top face normal +z.
  const PosedMesh obj = boxMesh(Vec3(0, 0, 0), Vec3(0.05, 0.05, 0.05));
  // Probe "hand" of 3 vertices, all subsampled.
  PosedMesh probe;
  probe.vertices.resize(3, 3);
  probe.faces.resize(1, 3);
  probe.faces << 0, 1, 2;
  const std::vector<int> sub = {0, 1, 2};

  SUBCASE("entirely outside: E = M") {
    probe.vertices << 0.2, 0.2, 0.2, 0.3, 0, 0, 0, 0.3, 0;
    CHECK(ePhy(probe, obj, sub, 5.0) == doctest::Approx(3.0));
  }

  SUBCASE("one vertex 1cm under the nearest corner plane") {
    // Nearest object vertex to the probe is the corner (0.05,0.05,0.05)
    // whose normal is (1,1,1)/sqrt(3). Place the probe along the inward
    // normal at depth 0.01.
    const Vec3 corner(0.05, 0.05, 0.05);
    const Vec3 n = Vec3(1, 1, 1).normalized();
    probe.vertices.row(0) = (corner - 0.01 * n).transpose();
    probe.vertices.row(1) = Vec3(0.3, 0, 0).transpose();
    probe.vertices.row(2) = Vec3(0, 0.3, 0).transpose();
    const double expect = std::exp(5.0 * 0.01) + 2.0;
    CHECK(ePhy(probe, obj, sub, 5.0) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(std::exp(5.0 * 0.01) == doctest::Approx(1.0513).epsilon(1e-4));
    CHECK(maxPenetration(probe, obj, sub) == doctest::Approx(0.01));
  }

  SUBCASE("pushing a penetrating vertex out along the normal decreases E") {
    const Vec3 corner(0.05, 0.05, 0.05);
    const Vec3 n = Vec3(1, 1, 1).normalized();
    probe.vertices.row(1) = Vec3(0.3, 0, 0).transpose();
    probe.vertices.row(2) = Vec3(0, 0.3, 0).transpose();
    double prev = std::numeric_limits<double>::infinity();
    for (double depth = 0.02; depth >= -0.005; depth -= 0.005) {
      probe.vertices.row(0) = (corner - depth * n).transpose();
      const double e = ePhy(probe, obj, sub, 5.0);
      CHECK(e <= prev);
      prev = e;
    }
  }
}

TEST_CASE("e_tc: constant pose, constant velocity, gradient") {
  const int n = 57;
  Rng rng(5);
  VecX p0(n), delta(n);
  for (int i = 0; i < n; ++i) {
    p0[i] = rng.normal();
    delta[i] = 0.1 * rng.normal();
  }

  SUBCASE("constant pose -> 0") {
    CHECK(eTc(p0, p0, p0) == 0.0);
  }

  SUBCASE("constant velocity: only zeroth-order terms") {
    const VecX p1 = p0 + delta, p2 = p1 + delta;
    CHECK(eTc(p2, p1, p0) == doctest::Approx(delta.squaredNorm()));
  }

  SUBCASE("boundary handling") {
    CHECK(eTc(p0, VecX(), VecX()) == 0.0);
    const VecX p1 = p0 + delta;
    CHECK(eTc(p1, p0, VecX()) == doctest::Approx(delta.squaredNorm()));
  }

  SUBCASE("gradients match finite differences to 1e-6") {
    const VecX p1 = p0 + delta;
    VecX p2 = p1 + delta;
    p2[3] += 0.05;
    VecX d_cur, d_prev, d_prev2;
    eTc(p2, p1, p0, &d_cur, &d_prev, &d_prev2);
    auto f_cur = [&](const VecX& x) { return eTc(x, p1, p0); };
    auto f_prev = [&](const VecX& x) { return eTc(p2, x, p0); };
    auto f_prev2 = [&](const VecX& x) { return eTc(p2, p1, x); };
    CHECK(oracle::vecRelError(d_cur, oracle::centralDiff(f_cur, p2, 1e-6)) < 1e-6);
    CHECK(oracle::vecRelError(d_prev, oracle::centralDiff(f_prev, p1, 1e-6)) < 1e-6);
    CHECK(oracle::vecRelError(d_prev2, oracle::centralDiff(f_prev2, p0, 1e-6)) < 1e-6);
  }
}

TEST_CASE("breakdown total equals the weighted sum of terms") {
  EnergyBreakdown bd;
  bd.mask = 0.3;
  bd.dpt = 0.01;
  bd.j2d = 120.0;
  bd.e3d = 0.004;
  bd.joint = 0.2;
  bd.phy = 66.0;
  bd.tc = 0.05;
  EnergyWeights w;
  bd.total = bd.weightedSum(w);
  const double manual = w.alpha * bd.mask + w.beta * bd.dpt + w.gamma * bd.j2d +
                        w.delta * bd.e3d + w.epsilon * bd.joint +
                        w.zeta * bd.phy + w.eta * bd.tc;
  CHECK(std::abs(bd.total - manual) <= 1e-9 * std::abs(manual));
}

TEST_CASE("weights validate") {
  EnergyWeights w;
  w.tukey_c = 0;
  CHECK_THROWS_AS(w.validate(), InvalidInput);
  w = {};
  w.alpha = -1;
  CHECK_THROWS_AS(w.validate(), InvalidInput);
}
