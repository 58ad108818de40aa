#include "hoa/lifter.hpp"

#include "hoa/errors.hpp"
#include "hoa/optim.hpp"

#include <algorithm>
#include <cmath>

namespace hoa {
namespace {

constexpr int kFitParams = kHandParams + kNumShapeParams;  // 61
constexpr double kBehindCameraMargin = 0.05;  // meters in front of the camera

HandPose posePart(const VecX& x) { return HandPose::fromVector(x.head<kHandParams>()); }

ShapeParams shapePart(const VecX& x) {
  ShapeParams s;
  s.beta = x.tail<kNumShapeParams>();
  return s;
}

double weakPerspectiveDepth(const HandModel& model, const MatX& keypoints,
                            const Camera& cam) {
  const MatX rest = forwardKinematics(model, {}, {}).joints21;
  const Vec3 c3 = rest.colwise().mean().transpose();
  double spread3 = 0;
  for (int i = 0; i < rest.rows(); ++i) spread3 += (rest.row(i).transpose() - c3).squaredNorm();
  spread3 = std::sqrt(spread3 / rest.rows());

  Vec2 c2 = Vec2::Zero();
  double wsum = 0;
  for (int i = 0; i < 21; ++i) {
    const double w = keypoints(i, 2);
    c2 += w * Vec2(keypoints(i, 0), keypoints(i, 1));
    wsum += w;
  }
  if (wsum <= 0) return 0.5;
  c2 /= wsum;
  double spread2 = 0;
  for (int i = 0; i < 21; ++i) {
    const double w = keypoints(i, 2);
    spread2 += w * (Vec2(keypoints(i, 0), keypoints(i, 1)) - c2).squaredNorm();
  }
  spread2 = std::sqrt(spread2 / wsum);
  if (spread2 < 1e-6) return 0.5;
  return std::clamp(0.5 * (cam.fx + cam.fy) * spread3 / spread2, 0.1, 3.0);
}

}  // namespace

void KeypointPrediction::validate() const {
  if (keypoints.rows() != 21 || keypoints.cols() != 3)
    throw InvalidInput("prediction keypoints must be 21x3");
  if (directions.rows() != 20 || directions.cols() != 3)
    throw InvalidInput("prediction directions must be 20x3");
  for (int i = 0; i < 20; ++i) {
    const double n = directions.row(i).norm();
    if (n > 0 && std::abs(n - 1.0) > 1e-6)
      throw InvalidInput("prediction directions must be unit vectors");
  }
  camera.validate();
}

MatX jointDirections(const MatX& joints21, std::vector<int>* degenerate) {
  if (joints21.rows() != 21) throw InvalidInput("jointDirections: expected 21 joints");
  MatX dirs = MatX::Zero(20, 3);
  for (int i = 0; i < 20; ++i) {
    const Vec3 u = (joints21.row(i + 1) - joints21.row(0)).transpose();
    const double n = u.norm();
    if (n < 1e-9) {
      if (degenerate) degenerate->push_back(i);
      continue;
    }
    dirs.row(i) = (u / n).transpose();
  }
  return dirs;
}

double lifterLoss(const KeypointPrediction& pred, const HandModel& model,
                  const EnergyWeights& weights, const HandPose& pose,
                  const ShapeParams& shape) {
  const MatX joints = forwardKinematics(model, pose, shape).joints21;
  double loss = 0;
  for (int i = 0; i < 21; ++i) {
    if (pred.keypoints(i, 2) <= 0) continue;
    const Projection p = project(joints.row(i).transpose(), pred.camera);
    if (!p.valid) continue;
    loss += Vec2(p.u - pred.keypoints(i, 0), p.v - pred.keypoints(i, 1)).squaredNorm();
  }
  const MatX dirs = jointDirections(joints);
  for (int i = 0; i < 20; ++i) {
    if (dirs.row(i).norm() == 0 || pred.directions.row(i).norm() == 0) continue;
    loss += weights.rho * (1.0 - dirs.row(i).dot(pred.directions.row(i)));
  }
  loss += weights.sigma * limitViolations(pose, model).sum();
  loss += weights.tau * shape.beta.squaredNorm();
  return loss;
}

LifterFit fitHand(const KeypointPrediction& pred, const HandModel& model,
                  const EnergyWeights& weights) {
  pred.validate();

  // Least-squares shaping: keypoint residuals, direction residuals as
  // sqrt(rho/2)(d_hat - d) (exact for unit vectors), sqrt-violation limit
  // residuals and sqrt(tau) beta rows. The limit weight is boosted during
  // the first trust-region pass to keep the search out of folded,
  // limit-violating basins; the final passes use the exact weights.
  const int kp_rows = 42, dir_rows = 60, lim_rows = kNumFingerAngles, beta_rows = 10;
  const int rows = kp_rows + dir_rows + lim_rows + beta_rows;

  double limit_boost = 1.0;
  const ResidualFn residuals = [&](const VecX& x, VecX* r, MatX* jac) {
    r->setZero(rows);
    if (jac) jac->setZero(rows, kFitParams);
    const HandPose pose = posePart(x);
    const ShapeParams shape = shapePart(x);
    const MatX joints = forwardKinematics(model, pose, shape).joints21;
    HandJacobians hj;
    if (jac) hj = handJacobians(model, pose, shape, true);
    auto jointJac = [&](int i) {
      MatX dj(3, kFitParams);
      dj.leftCols<kHandParams>() = hj.joints_pose.middleRows<3>(3 * i);
      dj.rightCols<kNumShapeParams>() = hj.joints_shape.middleRows<3>(3 * i);
      return dj;
    };

    int row = 0;
    for (int i = 0; i < 21; ++i, row += 2) {
      if (pred.keypoints(i, 2) <= 0) continue;
      const Projection p = project(joints.row(i).transpose(), pred.camera, jac != nullptr);
      if (!p.valid || p.z < kBehindCameraMargin) {
        // Depth barrier: keeps the fit from hiding joints behind the camera.
        (*r)[row] = pred.camera.fx * (kBehindCameraMargin - p.z);
        if (jac) {
          const Vec3 dz = pred.camera.extrinsic.rot.row(2).transpose();
          jac->block(row, 0, 1, kFitParams) =
              -pred.camera.fx * (dz.transpose() * jointJac(i));
        }
        continue;
      }
      (*r)[row] = p.u - pred.keypoints(i, 0);
      (*r)[row + 1] = p.v - pred.keypoints(i, 1);
      if (jac) jac->block(row, 0, 2, kFitParams) = p.jac * jointJac(i);
    }
    const double dir_w = std::sqrt(weights.rho / 2.0);
    for (int i = 0; i < 20; ++i, row += 3) {
      if (pred.directions.row(i).norm() == 0) continue;
      const Vec3 u = (joints.row(i + 1) - joints.row(0)).transpose();
      const double n = u.norm();
      if (n < 1e-9) continue;
      const Vec3 d_hat = u / n;
      r->segment<3>(row) = dir_w * (d_hat - pred.directions.row(i).transpose());
      if (jac) {
        const Mat3 dnorm = (Mat3::Identity() - d_hat * d_hat.transpose()) / n;
        jac->block(row, 0, 3, kFitParams) =
            dir_w * dnorm * (jointJac(i + 1) - jointJac(0));
      }
    }
    const double lim_w = std::sqrt(weights.sigma * limit_boost);
    for (int i = 0; i < kNumFingerAngles; ++i, ++row) {
      const double a = pose.angles[i];
      double v = 0, dv = 0;
      if (a < model.limits_lo[i]) {
        v = model.limits_lo[i] - a;
        dv = -1;
      } else if (a > model.limits_hi[i]) {
        v = a - model.limits_hi[i];
        dv = 1;
      }
      (*r)[row] = lim_w * v;
      if (jac) (*jac)(row, i) = lim_w * dv;
    }
    const double beta_w = std::sqrt(weights.tau);
    for (int b = 0; b < kNumShapeParams; ++b, ++row) {
      (*r)[row] = beta_w * x[kHandParams + b];
      if (jac) (*jac)(row, kHandParams + b) = beta_w;
    }
  };

  // Polish objective: the exact loss with the linear limit penalty.
  const Objective polish = [&](const VecX& x, VecX* g) {
    const HandPose pose = posePart(x);
    const ShapeParams shape = shapePart(x);
    const MatX joints = forwardKinematics(model, pose, shape).joints21;
    HandJacobians hj;
    if (g) {
      hj = handJacobians(model, pose, shape, true);
      g->setZero(kFitParams);
    }
    auto addJointGrad = [&](int i, const Vec3& gj) {
      g->head<kHandParams>() += hj.joints_pose.middleRows<3>(3 * i).transpose() * gj;
      g->tail<kNumShapeParams>() += hj.joints_shape.middleRows<3>(3 * i).transpose() * gj;
    };
    double loss = 0;
    for (int i = 0; i < 21; ++i) {
      if (pred.keypoints(i, 2) <= 0) continue;
      const Projection p = project(joints.row(i).transpose(), pred.camera, g != nullptr);
      if (!p.valid || p.z < kBehindCameraMargin) {
        const double barrier = pred.camera.fx * (kBehindCameraMargin - p.z);
        loss += barrier * barrier;
        if (g) {
          const Vec3 dz = pred.camera.extrinsic.rot.row(2).transpose();
          addJointGrad(i, -2.0 * barrier * pred.camera.fx * dz);
        }
        continue;
      }
      const Vec2 res(p.u - pred.keypoints(i, 0), p.v - pred.keypoints(i, 1));
      loss += res.squaredNorm();
      if (g) addJointGrad(i, 2.0 * (p.jac.transpose() * res));
    }
    for (int i = 0; i < 20; ++i) {
      if (pred.directions.row(i).norm() == 0) continue;
      const Vec3 u = (joints.row(i + 1) - joints.row(0)).transpose();
      const double n = u.norm();
      if (n < 1e-9) continue;
      const Vec3 d_hat = u / n;
      const Vec3 d = pred.directions.row(i).transpose();
      loss += weights.rho * (1.0 - d_hat.dot(d));
      if (g) {
        const Vec3 gu = -weights.rho *
                        ((Mat3::Identity() - d_hat * d_hat.transpose()) / n) * d;
        addJointGrad(i + 1, gu);
        addJointGrad(0, -gu);
      }
    }
    loss += weights.sigma * limitViolations(pose, model).sum();
    if (g) {
      g->head<kNumFingerAngles>() +=
          weights.sigma * limitViolationsGradient(pose, model);
    }
    const VecX beta = x.tail<kNumShapeParams>();
    loss += weights.tau * beta.squaredNorm();
    if (g) g->tail<kNumShapeParams>() += 2.0 * weights.tau * beta;
    return loss;
  };

  // Multi-start over wrist rotations. When the direction term is active,
  // the predicted root-relative directions give a strong absolute-rotation
  // seed via Kabsch alignment against the rest-pose skeleton.
  std::vector<Vec3> seeds = {Vec3(0, 0, 0), Vec3(M_PI, 0, 0), Vec3(0, M_PI, 0),
                             Vec3(0, 0, M_PI)};
  if (weights.rho > 0) {
    const MatX rest_dirs =
        jointDirections(forwardKinematics(model, {}, {}).joints21);
    Mat3 cross = Mat3::Zero();
    for (int i = 0; i < 20; ++i) {
      if (pred.directions.row(i).norm() == 0 || rest_dirs.row(i).norm() == 0) continue;
      cross += pred.directions.row(i).transpose() * rest_dirs.row(i);
    }
    if (cross.norm() > 1e-9) {
      const Eigen::JacobiSVD<Mat3> svd(cross,
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
      Mat3 flip = Mat3::Identity();
      flip(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
      const Mat3 aligned = svd.matrixU() * flip * svd.matrixV().transpose();
      seeds.insert(seeds.begin(), rodriguesInverse(aligned));
    }
  }
  const double depth = weakPerspectiveDepth(model, pred.keypoints, pred.camera);
  const RigidTransform cam_to_world = pred.camera.extrinsic.inverse();
  const Vec3 wrist = cam_to_world.apply(
      depth * pixelRay(pred.keypoints(0, 0), pred.keypoints(0, 1), pred.camera));

  HandPose base;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    base.angles[i] = 0.5 * (model.limits_lo[i] + model.limits_hi[i]);
  }

  LifterFit out;
  double best = std::numeric_limits<double>::infinity();
  double best_init = std::numeric_limits<double>::infinity();
  for (const Vec3& seed : seeds) {
    VecX x = VecX::Zero(kFitParams);
    x.head<kNumFingerAngles>() = base.angles;
    x.segment<3>(kNumFingerAngles) = seed;
    x.segment<3>(kNumFingerAngles + 3) =
        wrist - rodrigues(seed) * model.rest_joints.row(0).transpose();

    best_init = std::min(best_init, polish(x, nullptr));

    TrustRegionConfig tr;
    tr.max_iterations = 150;
    VecX fitted;
    try {
      limit_boost = 25.0;
      fitted = trustRegionMinimize(residuals, x, tr).params;
      // Project into the feasible box and refine at the exact weights.
      for (int i = 0; i < kNumFingerAngles; ++i) {
        fitted[i] = std::clamp(fitted[i], model.limits_lo[i], model.limits_hi[i]);
      }
      limit_boost = 1.0;
      fitted = trustRegionMinimize(residuals, fitted, tr).params;
    } catch (const OptimFailure&) {
      limit_boost = 1.0;
      continue;
    }
    AdamConfig ac;
    ac.iterations = 300;
    ac.learning_rate = 0.01;
    ac.lr_decay = 0.99;
    try {
      fitted = adamMinimize(polish, fitted, ac).params;
    } catch (const OptimFailure&) {
      continue;
    }
    const double loss = polish(fitted, nullptr);
    if (loss < best) {
      best = loss;
      out.pose = posePart(fitted);
      out.shape = shapePart(fitted);
      out.loss = loss;
    }
  }
  out.converged = std::isfinite(best) && best <= best_init + 1e-12;
  return out;
}

}  // namespace hoa
