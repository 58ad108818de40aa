#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hoa/errors.hpp"
#include "hoa/hand_model.hpp"
#include "hoa/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hoa;
using testutil::syntheticHand;

TEST_CASE("synthetic model satisfies the type invariants") {
  const HandModel& m = syntheticHand();
  CHECK(m.vertexCount() > 400);
  CHECK(m.vertexCount() < 1600);
  for (int v = 0; v < m.vertexCount(); ++v) {
    CHECK(std::abs(m.skin_weights.row(v).sum() - 1.0) < 1e-6);
    CHECK(m.skin_weights.row(v).minCoeff() >= 0.0);
  }
  for (int i = 1; i < kNumNodes; ++i) CHECK(m.parents[i] < i);
  CHECK(m.faces.maxCoeff() < m.vertexCount());
  for (int i = 0; i < kNumFingerAngles; ++i) CHECK(m.limits_lo[i] <= m.limits_hi[i]);
}

TEST_CASE("identity pose reproduces rest joints and template") {
  const HandModel& m = syntheticHand();
  const HandPose identity;
  const ShapeParams mean;
  const FKResult fk = forwardKinematics(m, identity, mean);
  for (int i = 0; i < kNumNodes; ++i) {
    CHECK((fk.joints21.row(i) - m.rest_joints.row(i)).norm() < 1e-12);
  }
  for (int t = 0; t < 5; ++t) {
    CHECK((fk.joints21.row(kNumNodes + t) -
           m.template_vertices.row(m.tips[t]))
              .norm() < 1e-12);
  }
  const PosedMesh mesh = skin(m, identity, mean);
  CHECK((mesh.vertices - m.template_vertices).norm() < 1e-12);
  CHECK(mesh.degenerate_faces == 0);
}

TEST_CASE("global translation shifts every joint exactly") {
  const HandModel& m = syntheticHand();
  HandPose pose;
  pose.global_trans = Vec3(0.1, 0, 0);
  const MatX joints = forwardKinematics(m, pose, {}).joints21;
  const MatX base = forwardKinematics(m, {}, {}).joints21;
  for (int i = 0; i < kNumKeypoints; ++i) {
    CHECK((joints.row(i) - base.row(i) - Vec3(0.1, 0, 0).transpose()).norm() < 1e-12);
  }
}

TEST_CASE("FK matches the naive matrix-chain oracle") {
  const HandModel& m = syntheticHand();
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const HandPose pose = testutil::randomPose(rng);
    ShapeParams shape;
    for (int b = 0; b < kNumShapeParams; ++b) shape.beta[b] = 0.5 * rng.normal();
    const MatX ours = forwardKinematics(m, pose, shape).joints21;
    const MatX ref = oracle::naiveJoints21(m, pose, shape);
    CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("skinning matches the brute-force blend oracle") {
  const HandModel& m = syntheticHand();
  Rng rng(202);
  for (int trial = 0; trial < 5; ++trial) {
    const HandPose pose = testutil::randomPose(rng);
    ShapeParams shape;
    for (int b = 0; b < kNumShapeParams; ++b) shape.beta[b] = 0.4 * rng.normal();
    const PosedMesh mesh = skin(m, pose, shape);
    const MatX ref = oracle::bruteForceSkin(m, pose, shape);
    CHECK((mesh.vertices - ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("pure global rotation is rigid on the mesh") {
  const HandModel& m = syntheticHand();
  HandPose pose;
  pose.global_rot = Vec3(0.3, -0.5, 0.9);
  pose.global_trans = Vec3(0.02, -0.01, 0.4);
  const Mat3 rot = rodrigues(pose.global_rot);
  const PosedMesh posed = skin(m, pose, {});
  const PosedMesh rest = skin(m, {}, {});
  for (int v = 0; v < m.vertexCount(); ++v) {
    // Wrist joint is at the origin, so rotation acts about the origin.
    const Vec3 expect = rot * rest.vertices.row(v).transpose() + pose.global_trans;
    CHECK((posed.vertices.row(v).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("weights partition of unity: template translation moves vertices") {
  HandModel m = syntheticHand();
  const Vec3 t(0.03, -0.02, 0.05);
  HandModel shifted = m;
  shifted.template_vertices.rowwise() += t.transpose();
  shifted.rest_joints.rowwise() += t.transpose();
  shifted.finalize();
  Rng rng(33);
  const HandPose pose = testutil::randomPose(rng);
  const PosedMesh a = skin(m, pose, {});
  const PosedMesh b = skin(shifted, pose, {});
  // Rigidly moving template and skeleton together moves the posed mesh by
  // the rotated offset of the root only; with identity global rotation the
  // shift is exact.
  HandPose no_rot = pose;
  no_rot.global_rot.setZero();
  const PosedMesh a2 = skin(m, no_rot, {});
  const PosedMesh b2 = skin(shifted, no_rot, {});
  for (int v = 0; v < m.vertexCount(); ++v) {
    CHECK((b2.vertices.row(v) - a2.vertices.row(v) - t.transpose()).norm() < 1e-9);
  }
  (void)a;
  (void)b;
}

TEST_CASE("limit violations: table values and boundary cases") {
  const HandModel& m = syntheticHand();
  // Index MCP flexion is parameter 2 with limits (0.10, 1.80).
  CHECK(m.limits_lo[2] == doctest::Approx(0.10));
  CHECK(m.limits_hi[2] == doctest::Approx(1.80));
  HandPose pose;
  pose.angles.setZero();
  pose.angles[2] = 1.0;
  CHECK(limitViolations(pose, m)[2] == 0.0);
  pose.angles[2] = 2.0;
  CHECK(limitViolations(pose, m)[2] == doctest::Approx(0.2));
  // All angles at the lower bounds: no violations anywhere.
  for (int i = 0; i < kNumFingerAngles; ++i) pose.angles[i] = m.limits_lo[i];
  CHECK(limitViolations(pose, m).sum() == 0.0);
  // Piecewise linear, zero exactly on the box.
  pose.angles[2] = 0.10 - 0.05;
  CHECK(limitViolations(pose, m)[2] == doctest::Approx(0.05));
}

TEST_CASE("grasp/world conversions") {
  Rng rng(404);
  GraspPose grasp;
  grasp.angles.setRandom();
  grasp.global_rot = rng.normalVec3() * 0.7;
  grasp.global_trans = rng.normalVec3() * 0.1;

  SUBCASE("identity object keeps the pose") {
    const HandPose world = graspToWorld(grasp, {});
    CHECK((world.angles - grasp.angles).norm() == 0.0);
    CHECK((world.global_rot - grasp.global_rot).norm() < 1e-12);
    CHECK((world.global_trans - grasp.global_trans).norm() < 1e-12);
  }

  SUBCASE("round trip within 1e-9") {
    for (int i = 0; i < 20; ++i) {
      ObjectPose obj{rng.normalVec3() * 0.8, rng.normalVec3() * 0.3};
      const GraspPose back = worldToGrasp(graspToWorld(grasp, obj), obj);
      CHECK((back.angles - grasp.angles).norm() < 1e-9);
      CHECK((back.global_rot - grasp.global_rot).norm() < 1e-9);
      CHECK((back.global_trans - grasp.global_trans).norm() < 1e-9);
    }
  }

  SUBCASE("mesh-level oracle: world mesh is the object-frame mesh moved rigidly") {
    const HandModel& m = syntheticHand();
    GraspPose g = grasp;
    g.angles = testutil::feasiblePose(m, rng).angles;
    const ObjectPose obj{Vec3(0.2, -0.4, 0.6), Vec3(0.05, 0.02, -0.03)};
    const HandPose world = graspToWorld(g, obj);
    const PosedMesh world_mesh = skin(m, world, {});
    HandPose as_hand;
    as_hand.angles = g.angles;
    as_hand.global_rot = g.global_rot;
    as_hand.global_trans = g.global_trans;
    const PosedMesh obj_frame_mesh = skin(m, as_hand, {});
    const RigidTransform t = obj.transform();
    for (int v = 0; v < m.vertexCount(); ++v) {
      const Vec3 expect = t.apply(obj_frame_mesh.vertices.row(v));
      CHECK((world_mesh.vertices.row(v).transpose() - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("object pose compose-inverse sanity") {
  Rng rng(55);
  for (int i = 0; i < 20; ++i) {
    ObjectPose obj{rng.normalVec3(), rng.normalVec3() * 0.5};
    const RigidTransform id = obj.transform().compose(obj.transform().inverse());
    CHECK(rodriguesInverse(id.rot).norm() < 1e-9);
    CHECK(id.trans.norm() < 1e-9);
  }
}

TEST_CASE("joint jacobian matches central finite differences") {
  const HandModel& m = syntheticHand();
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const HandPose pose = testutil::randomPose(rng, 0.3);
    const ShapeParams shape;
    const HandJacobians jac = handJacobians(m, pose, shape);
    const VecX x0 = pose.toVector();
    const double step = 1e-5;
    for (int col : {0, 2, 7, 25, 44, 45, 46, 47, 48, 50}) {
      VecX xp = x0, xm = x0;
      xp[col] += step;
      xm[col] -= step;
      const MatX jp = forwardKinematics(m, HandPose::fromVector(xp), shape).joints21;
      const MatX jm = forwardKinematics(m, HandPose::fromVector(xm), shape).joints21;
      VecX fd(3 * kNumKeypoints);
      for (int i = 0; i < kNumKeypoints; ++i) {
        fd.segment<3>(3 * i) = ((jp.row(i) - jm.row(i)) / (2 * step)).transpose();
      }
      CHECK(oracle::vecRelError(VecX(jac.joints_pose.col(col)), fd) < 1e-4);
    }
  }
}

TEST_CASE("vertex and shape jacobians match finite differences") {
  const HandModel& m = syntheticHand();
  Rng rng(707);
  const HandPose pose = testutil::randomPose(rng, 0.3);
  ShapeParams shape;
  shape.beta[0] = 0.4;
  shape.beta[3] = -0.6;
  const HandJacobians jac = handJacobians(m, pose, shape, true);
  const double step = 1e-5;

  const VecX x0 = pose.toVector();
  for (int col : {1, 12, 30, 46, 49}) {
    VecX xp = x0, xm = x0;
    xp[col] += step;
    xm[col] -= step;
    const MatX vp = skin(m, HandPose::fromVector(xp), shape).vertices;
    const MatX vm = skin(m, HandPose::fromVector(xm), shape).vertices;
    VecX fd(3 * m.vertexCount());
    for (int v = 0; v < m.vertexCount(); ++v) {
      fd.segment<3>(3 * v) = ((vp.row(v) - vm.row(v)) / (2 * step)).transpose();
    }
    CHECK(oracle::vecRelError(VecX(jac.verts_pose.col(col)), fd) < 1e-4);
  }
  for (int b : {0, 3, 7}) {
    ShapeParams sp = shape, sm = shape;
    sp.beta[b] += step;
    sm.beta[b] -= step;
    const MatX vp = skin(m, pose, sp).vertices;
    const MatX vm = skin(m, pose, sm).vertices;
    VecX fd(3 * m.vertexCount());
    for (int v = 0; v < m.vertexCount(); ++v) {
      fd.segment<3>(3 * v) = ((vp.row(v) - vm.row(v)) / (2 * step)).transpose();
    }
    CHECK(oracle::vecRelError(VecX(jac.verts_shape.col(b)), fd) < 1e-4);
  }
}

TEST_CASE("non-finite pose is rejected") {
  const HandModel& m = syntheticHand();
  HandPose pose;
  pose.global_trans[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(forwardKinematics(m, pose, {}), InvalidInput);
  CHECK_THROWS_AS(skin(m, pose, {}), InvalidInput);
}
