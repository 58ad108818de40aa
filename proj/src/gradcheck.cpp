#include "hoa/gradcheck.hpp"

#include "hoa/evaluator.hpp"
#include "hoa/rng.hpp"
#include "hoa/shapes.hpp"
#include "hoa/stages.hpp"

#include <chrono>
#include <cmath>
#include <functional>

namespace hoa {
namespace {

Camera smallCamera() {
  Camera cam;
  cam.fx = cam.fy = 42.0;
  cam.cx = 16.1;
  cam.cy = 15.9;
  cam.width = 32;
  cam.height = 32;
  return cam;
}

HandPose feasiblePose(const HandModel& model, Rng& rng, double spread) {
  HandPose p;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double lo = model.limits_lo[i], hi = model.limits_hi[i];
    p.angles[i] = 0.5 * (lo + hi) + spread * 0.5 * (hi - lo) * (2 * rng.uniform() - 1);
  }
  p.global_rot = 0.4 * rng.normalVec3();
  p.global_trans = Vec3(0.02 * rng.normal(), 0.02 * rng.normal(), 0.5 + 0.05 * rng.uniform());
  return p;
}

VecX centralDiff(const std::function<double(const VecX&)>& f, const VecX& x,
                 double step) {
  VecX g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2 * step);
  }
  return g;
}

double relError(const VecX& a, const VecX& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

struct Scene {
  SceneModels models;
  CameraRig rig;
  FrameData frame;
  HandPose gt_pose;
  ObjectPose gt_obj;
};

// Observation with full depth coverage: the rendered ground-truth scene
// over a far plane, labeled foreground everywhere. This keeps the depth
// term's active set constant so finite differences are meaningful.
FrameObservation denseDepthObs(const PosedMesh& hand, const PosedMesh& obj,
                               const Camera& cam) {
  const HardRaster hr = hardRasterize(hand, obj, cam);
  FrameObservation obs;
  obs.mask = ImageU8(cam.width, cam.height, kLabelHand);
  obs.depth = ImageD(cam.width, cam.height, 2.0);
  for (int i = 0; i < cam.width * cam.height; ++i) {
    if (std::isfinite(hr.depth.data[i])) obs.depth.data[i] = hr.depth.data[i];
    if (hr.labels.data[i] != kLabelBackground) obs.mask.data[i] = hr.labels.data[i];
  }
  obs.keypoints = MatX::Zero(21, 3);
  return obs;
}

Scene buildScene(Rng& rng, bool with_object) {
  Scene scene;
  scene.models.hand = HandModel::makeSynthetic();
  if (with_object) scene.models.object = makeBoxGrid(Vec3(0.05, 0.04, 0.03), 4);
  scene.models.finalize();
  scene.rig.cameras.push_back(smallCamera());
  scene.rig.reference = 0;

  const HandPose gt_pose = feasiblePose(scene.models.hand, rng, 0.4);
  ObjectPose gt_obj;
  gt_obj.rot = 0.5 * rng.normalVec3();
  gt_obj.trans = gt_pose.global_trans + Vec3(0.16, 0.02, 0.05);
  scene.gt_pose = gt_pose;
  scene.gt_obj = gt_obj;

  const PosedMesh hand = skin(scene.models.hand, gt_pose, {});
  const PosedMesh obj = with_object ? scene.models.posedObject(gt_obj) : PosedMesh{};
  FrameObservation obs = denseDepthObs(hand, obj, scene.rig.cameras[0]);
  // Exact keypoints for the reprojection term.
  const MatX joints = forwardKinematics(scene.models.hand, gt_pose, {}).joints21;
  for (int i = 0; i < 21; ++i) {
    const Projection p = project(joints.row(i).transpose(), scene.rig.cameras[0]);
    obs.keypoints.row(i) << p.u, p.v, (i % 3 == 0 ? 0.7 : 1.0);
  }
  scene.frame.views.push_back(std::move(obs));
  // Cloud on the observed surfaces only (the far plane fill and the
  // hand-everywhere labels are for the depth term; the cloud needs true
  // per-point labels instead).
  const HardRaster hr = hardRasterize(hand, obj, scene.rig.cameras[0]);
  FrameObservation surf;
  surf.mask = hr.labels;
  surf.depth = ImageD(32, 32, 0.0);
  for (int i = 0; i < 32 * 32; ++i) {
    if (std::isfinite(hr.depth.data[i])) surf.depth.data[i] = hr.depth.data[i];
  }
  surf.keypoints = MatX::Zero(21, 3);
  scene.frame.cloud = backproject(surf, scene.rig.cameras[0], 1.5);
  return scene;
}

// Evaluation pose: near the ground truth but pulled toward the camera so
// the rendered silhouette strictly contains the observed one.
VecX evalParams(const Scene& scene, Rng& rng, const HandPose& base_from,
                const ObjectPose& obj_from) {
  HandPose pose = base_from;
  pose.global_trans += Vec3(0.001 * rng.normal(), 0.001 * rng.normal(), -0.018);
  pose.global_rot += 0.01 * rng.normalVec3();
  for (int i = 0; i < kNumFingerAngles; ++i) pose.angles[i] += 0.005 * rng.normal();
  ObjectPose obj = obj_from;
  obj.trans += Vec3(0.001 * rng.normal(), 0.001 * rng.normal(), -0.015);
  obj.rot += 0.008 * rng.normalVec3();
  (void)scene;
  return packFrameParams(pose, obj);
}

}  // namespace

GradCheckReport runGradientChecks(uint64_t seed, int trials) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;

  struct TermSpec {
    const char* name;
    double tolerance;
    double fd_step;
    EnergyWeights weights;  // isolates the term
  };
  auto isolated = [](double EnergyWeights::* field, double value) {
    EnergyWeights w;
    w.alpha = w.beta = w.gamma = w.delta = w.epsilon = w.zeta = w.eta = 0;
    w.*field = value;
    w.tukey_c = 0.05;
    w.sharpness = 40.0;
    return w;
  };
  const std::vector<TermSpec> specs = {
      {"e_mask", 1e-2, 1e-6, isolated(&EnergyWeights::alpha, 1.0)},
      {"e_dpt", 1e-2, 1e-6, isolated(&EnergyWeights::beta, 1.0)},
      {"e_j2d", 1e-4, 1e-6, isolated(&EnergyWeights::gamma, 1.0)},
      {"e_3d", 1e-4, 1e-7, isolated(&EnergyWeights::delta, 1.0)},
      {"e_joint", 1e-4, 1e-6, isolated(&EnergyWeights::epsilon, 1.0)},
      {"e_phy", 1e-4, 1e-7, isolated(&EnergyWeights::zeta, 1.0)},
  };

  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed + 17 * trial + 1);
    const Scene scene = buildScene(rng, true);
    const VecX x0 = evalParams(scene, rng, scene.gt_pose, scene.gt_obj);

    for (const TermSpec& spec : specs) {
      // The repulsion term needs actual contact: evaluate it with the
      // object shifted into the hand.
      VecX x = x0;
      if (std::string(spec.name) == "e_phy") {
        x.segment<3>(kHandParams + 3) =
            x0.head<kHandParams>().tail<3>() + Vec3(0.015, 0.005, 0.002);
      }
      const FrameEnergy fe(scene.models, scene.rig, scene.frame, spec.weights);
      VecX analytic;
      fe.eval(FrameEnergy::Mode::World, x, {}, &analytic, nullptr);
      const VecX fd = centralDiff(
          [&](const VecX& xq) {
            return fe.eval(FrameEnergy::Mode::World, xq, {}, nullptr, nullptr);
          },
          x, spec.fd_step);
      GradCheckReport::Entry e;
      e.name = spec.name;
      e.trial = trial;
      e.rel_err = relError(analytic, fd);
      e.tolerance = spec.tolerance;
      e.pass = e.rel_err < e.tolerance;
      report.entries.push_back(e);
    }

    // Temporal term on packed parameter vectors.
    {
      Rng trng(seed + 1000 + trial);
      VecX cur(57), prev(57), prev2(57);
      for (int i = 0; i < 57; ++i) {
        cur[i] = trng.normal();
        prev[i] = trng.normal();
        prev2[i] = trng.normal();
      }
      VecX analytic;
      eTc(cur, prev, prev2, &analytic);
      const VecX fd = centralDiff(
          [&](const VecX& x) { return eTc(x, prev, prev2); }, cur, 1e-6);
      GradCheckReport::Entry e;
      e.name = "e_tc";
      e.trial = trial;
      e.rel_err = relError(analytic, fd);
      e.tolerance = 1e-4;
      e.pass = e.rel_err < e.tolerance;
      report.entries.push_back(e);
    }

    // FK Jacobian of the 21 keypoints.
    {
      const HandPose pose = feasiblePose(scene.models.hand, rng, 0.5);
      const HandJacobians jac = handJacobians(scene.models.hand, pose, {});
      VecX analytic(jac.joints_pose.size());
      Eigen::Map<MatX>(analytic.data(), jac.joints_pose.rows(),
                       jac.joints_pose.cols()) = jac.joints_pose;
      MatX fd_full(jac.joints_pose.rows(), jac.joints_pose.cols());
      const VecX p0 = pose.toVector();
      for (int col = 0; col < kHandParams; ++col) {
        VecX xp = p0, xm = p0;
        xp[col] += 1e-5;
        xm[col] -= 1e-5;
        const MatX jp = forwardKinematics(scene.models.hand,
                                          HandPose::fromVector(xp), {}).joints21;
        const MatX jm = forwardKinematics(scene.models.hand,
                                          HandPose::fromVector(xm), {}).joints21;
        for (int i = 0; i < kNumKeypoints; ++i) {
          fd_full.block<3, 1>(3 * i, col) =
              ((jp.row(i) - jm.row(i)) / 2e-5).transpose();
        }
      }
      VecX fd(fd_full.size());
      Eigen::Map<MatX>(fd.data(), fd_full.rows(), fd_full.cols()) = fd_full;
      GradCheckReport::Entry e;
      e.name = "fk_jacobian";
      e.trial = trial;
      e.rel_err = relError(analytic, fd);
      e.tolerance = 1e-4;
      e.pass = e.rel_err < e.tolerance;
      report.entries.push_back(e);
    }
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace hoa
