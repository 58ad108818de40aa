// Independent reference implementations used only as test oracles. These
// deliberately avoid the library's own math helpers where feasible.
#pragma once

#include "hoa/geometry.hpp"
#include "hoa/hand_model.hpp"

#include <Eigen/Geometry>

#include <functional>
#include <vector>

namespace oracle {

using hoa::MatX;
using hoa::Vec3;
using hoa::VecX;

inline Eigen::Matrix4d rot4(const Vec3& axis_angle) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const double angle = axis_angle.norm();
  if (angle > 0) {
    m.block<3, 3>(0, 0) =
        Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
  }
  return m;
}

inline Eigen::Matrix4d trans4(const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

// Per-node world matrices by explicit 4x4 chains.
inline std::vector<Eigen::Matrix4d> naiveNodeMatrices(
    const hoa::HandModel& model, const hoa::HandPose& pose) {
  std::vector<Eigen::Matrix4d> world(hoa::kNumNodes);
  world[0] = trans4(model.rest_joints.row(0)) * rot4(pose.global_rot);
  for (int i = 1; i < hoa::kNumNodes; ++i) {
    const int p = model.parents[i];
    const Vec3 offset = model.rest_joints.row(i) - model.rest_joints.row(p);
    world[i] = world[p] * trans4(offset) * rot4(pose.angles.segment<3>(3 * (i - 1)));
  }
  return world;
}

// Straightforward FK: 16 node positions plus skinned tips.
inline MatX naiveJoints21(const hoa::HandModel& model, const hoa::HandPose& pose,
                          const hoa::ShapeParams& shape) {
  const auto world = naiveNodeMatrices(model, pose);
  MatX joints(hoa::kNumKeypoints, 3);
  for (int i = 0; i < hoa::kNumNodes; ++i) {
    joints.row(i) =
        (world[i].block<3, 1>(0, 3) + pose.global_trans).transpose();
  }
  MatX shaped = model.template_vertices;
  for (int b = 0; b < hoa::kNumShapeParams; ++b) {
    shaped += shape.beta[b] * model.shape_dirs[b];
  }
  for (int t = 0; t < 5; ++t) {
    const int v = model.tips[t];
    Eigen::Vector4d h(shaped(v, 0), shaped(v, 1), shaped(v, 2), 1.0);
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < hoa::kNumNodes; ++j) {
      const Eigen::Matrix4d bind = trans4(-Vec3(model.rest_joints.row(j)));
      acc += model.skin_weights(v, j) *
             ((world[j] * bind * h).head<3>());
    }
    joints.row(hoa::kNumNodes + t) = (acc + pose.global_trans).transpose();
  }
  return joints;
}

// Dense 16-transform linear blend skinning.
inline MatX bruteForceSkin(const hoa::HandModel& model, const hoa::HandPose& pose,
                           const hoa::ShapeParams& shape) {
  const auto world = naiveNodeMatrices(model, pose);
  std::vector<Eigen::Matrix4d> skinning(hoa::kNumNodes);
  for (int j = 0; j < hoa::kNumNodes; ++j) {
    skinning[j] = world[j] * trans4(-Vec3(model.rest_joints.row(j)));
  }
  MatX shaped = model.template_vertices;
  for (int b = 0; b < hoa::kNumShapeParams; ++b) {
    shaped += shape.beta[b] * model.shape_dirs[b];
  }
  MatX out(model.vertexCount(), 3);
  for (int v = 0; v < model.vertexCount(); ++v) {
    Eigen::Vector4d h(shaped(v, 0), shaped(v, 1), shaped(v, 2), 1.0);
    Eigen::Vector4d acc = Eigen::Vector4d::Zero();
    for (int j = 0; j < hoa::kNumNodes; ++j) {
      acc += model.skin_weights(v, j) * (skinning[j] * h);
    }
    out.row(v) = (acc.head<3>() + pose.global_trans).transpose();
  }
  return out;
}

// O(N*M) nearest vertex with the lowest-index tie rule.
inline std::vector<int> bruteNearest(const MatX& points, const MatX& verts) {
  std::vector<int> out(points.rows());
  for (int i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d2 = (verts.row(0) - points.row(i)).squaredNorm();
    for (int j = 1; j < verts.rows(); ++j) {
      const double d2 = (verts.row(j) - points.row(i)).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
    out[i] = best;
  }
  return out;
}

// Plane-then-barycentric ray cast, independent of the renderer's
// Moller-Trumbore. Ray: origin 0, direction dir. Returns t or -1.
inline double planeRayCast(const Vec3& dir, const Vec3& a, const Vec3& b,
                           const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(dir);
  if (std::abs(denom) < 1e-15) return -1.0;
  const double t = n.dot(a) / denom;
  if (t <= 0) return -1.0;
  const Vec3 p = t * dir;
  // Barycentric via dot products.
  const Vec3 v0 = b - a, v1 = c - a, v2 = p - a;
  const double d00 = v0.dot(v0), d01 = v0.dot(v1), d11 = v1.dot(v1);
  const double d20 = v2.dot(v0), d21 = v2.dot(v1);
  const double det = d00 * d11 - d01 * d01;
  if (std::abs(det) < 1e-18) return -1.0;
  const double u = (d11 * d20 - d01 * d21) / det;
  const double v = (d00 * d21 - d01 * d20) / det;
  if (u < 0 || v < 0 || u + v > 1) return -1.0;
  return t;
}

// Central finite differences of a scalar function.
inline VecX centralDiff(const std::function<double(const VecX&)>& f,
                        const VecX& x, double step) {
  VecX g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (f(xp) - f(xm)) / (2 * step);
  }
  return g;
}

inline double vecRelError(const VecX& a, const VecX& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

// Brute-force F-score between two vertex sets at a threshold.
inline double bruteFScore(const MatX& pred, const MatX& gt, double threshold) {
  auto frac_within = [&](const MatX& from, const MatX& to) {
    int hits = 0;
    for (int i = 0; i < from.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < to.rows(); ++j) {
        best = std::min(best, (from.row(i) - to.row(j)).norm());
      }
      if (best <= threshold) ++hits;
    }
    return from.rows() > 0 ? static_cast<double>(hits) / from.rows() : 0.0;
  };
  const double precision = frac_within(pred, gt);
  const double recall = frac_within(gt, pred);
  if (precision + recall <= 0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace oracle
