#pragma once

#include "hoa/geometry.hpp"
#include "hoa/mesh.hpp"

#include <array>
#include <vector>

namespace hoa {

inline constexpr int kNumNodes = 16;       // wrist + 15 finger joints
inline constexpr int kNumFingerAngles = 45;
inline constexpr int kNumShapeParams = 10;
inline constexpr int kHandParams = 51;     // 45 angles + global rot + trans
inline constexpr int kObjectParams = 6;
inline constexpr int kNumKeypoints = 21;   // wrist, 15 joints, 5 tips

// 45 axis-angle finger parameters plus a global wrist transform.
struct HandPose {
  Eigen::Matrix<double, kNumFingerAngles, 1> angles =
      Eigen::Matrix<double, kNumFingerAngles, 1>::Zero();
  Vec3 global_rot = Vec3::Zero();
  Vec3 global_trans = Vec3::Zero();

  VecX toVector() const;
  static HandPose fromVector(const VecX& v);
  bool isFinite() const;
};

// Hand pose expressed in the object coordinate system. Same layout as
// HandPose; a distinct type so the frames cannot be mixed up silently.
struct GraspPose {
  Eigen::Matrix<double, kNumFingerAngles, 1> angles =
      Eigen::Matrix<double, kNumFingerAngles, 1>::Zero();
  Vec3 global_rot = Vec3::Zero();
  Vec3 global_trans = Vec3::Zero();

  VecX toVector() const;
  static GraspPose fromVector(const VecX& v);
};

struct ObjectPose {
  Vec3 rot = Vec3::Zero();    // axis-angle
  Vec3 trans = Vec3::Zero();  // meters

  RigidTransform transform() const { return {rodrigues(rot), trans}; }
  static ObjectPose fromTransform(const RigidTransform& t) {
    return {rodriguesInverse(t.rot), t.trans};
  }
  VecX toVector() const;
  static ObjectPose fromVector(const VecX& v);
  bool isFinite() const;
};

struct ShapeParams {
  Eigen::Matrix<double, kNumShapeParams, 1> beta =
      Eigen::Matrix<double, kNumShapeParams, 1>::Zero();
};

// Skinned template + kinematic tree + shape blendshapes + joint limits.
struct HandModel {
  MatX template_vertices;               // V x 3, meters
  Eigen::MatrixXi faces;                // F x 3
  std::array<int, kNumNodes> parents{}; // parent index per node, root = 0
  MatX rest_joints;                     // 16 x 3
  std::array<int, 5> tips{};            // fingertip vertex indices
  MatX skin_weights;                    // V x 16, rows sum to 1
  std::array<MatX, kNumShapeParams> shape_dirs;  // each V x 3
  VecX limits_lo, limits_hi;            // 45 each, radians

  int vertexCount() const { return static_cast<int>(template_vertices.rows()); }
  int faceCount() const { return static_cast<int>(faces.rows()); }

  // Fixed farthest-point subsample of hand vertices used by the
  // interpenetration term. Built by finalize().
  std::vector<int> phy_subsample;

  // Validates the type invariants and builds derived data. Throws
  // InvalidInput on violation.
  void finalize(int phy_subsample_size = 64);

  // Template plus shape blendshape displacement, V x 3.
  MatX shapedVertices(const ShapeParams& shape) const;

  // Procedural low-poly hand asset with the same parameterization as the
  // file format (V ~ 800, 16 nodes, 5 tip vertices).
  static HandModel makeSynthetic();
};

struct FKResult {
  std::array<RigidTransform, kNumNodes> node_world;  // G_i, no global trans
  std::array<RigidTransform, kNumNodes> skinning;    // A_i = G_i * [I|-j_i]
  Vec3 global_trans = Vec3::Zero();
  MatX joints21;  // 21 x 3: wrist, 15 joints in tree order, 5 tips
};

FKResult forwardKinematics(const HandModel& model, const HandPose& pose,
                           const ShapeParams& shape);

// Linear blend skinning of the shaped template under the given pose.
PosedMesh skin(const HandModel& model, const HandPose& pose,
               const ShapeParams& shape);

// Analytic derivatives of the skinned vertices and the 21 keypoints with
// respect to the 51 pose parameters (and optionally the 10 shape
// parameters). Layout: row 3*i+c is coordinate c of point i.
struct HandJacobians {
  MatX verts_pose;    // (3V) x 51
  MatX joints_pose;   // 63 x 51
  MatX verts_shape;   // (3V) x 10 (empty unless requested)
  MatX joints_shape;  // 63 x 10 (tips only; empty unless requested)
};

HandJacobians handJacobians(const HandModel& model, const HandPose& pose,
                            const ShapeParams& shape,
                            bool with_shape = false);

// Per-parameter non-negative limit violations:
// max(lo - a, 0) + max(a - hi, 0). E_joint is the sum of the entries.
VecX limitViolations(const HandPose& pose, const HandModel& model);

// d(sum of violations)/d(angles), the subgradient (0 inside the box).
VecX limitViolationsGradient(const HandPose& pose, const HandModel& model);

// Rigid change of coordinates between world and object frames. Finger
// angles are untouched.
HandPose graspToWorld(const GraspPose& grasp, const ObjectPose& obj);
GraspPose worldToGrasp(const HandPose& hand, const ObjectPose& obj);

}  // namespace hoa
