#include "hoa/hand_model.hpp"

#include "hoa/errors.hpp"

#include <cmath>
#include <limits>

namespace hoa {

VecX HandPose::toVector() const {
  VecX v(kHandParams);
  v.head<kNumFingerAngles>() = angles;
  v.segment<3>(kNumFingerAngles) = global_rot;
  v.tail<3>() = global_trans;
  return v;
}

HandPose HandPose::fromVector(const VecX& v) {
  if (v.size() != kHandParams) throw InvalidInput("hand pose vector must have 51 entries");
  HandPose p;
  p.angles = v.head<kNumFingerAngles>();
  p.global_rot = v.segment<3>(kNumFingerAngles);
  p.global_trans = v.tail<3>();
  return p;
}

bool HandPose::isFinite() const {
  return angles.allFinite() && global_rot.allFinite() && global_trans.allFinite();
}

VecX GraspPose::toVector() const {
  VecX v(kHandParams);
  v.head<kNumFingerAngles>() = angles;
  v.segment<3>(kNumFingerAngles) = global_rot;
  v.tail<3>() = global_trans;
  return v;
}

GraspPose GraspPose::fromVector(const VecX& v) {
  if (v.size() != kHandParams) throw InvalidInput("grasp pose vector must have 51 entries");
  GraspPose p;
  p.angles = v.head<kNumFingerAngles>();
  p.global_rot = v.segment<3>(kNumFingerAngles);
  p.global_trans = v.tail<3>();
  return p;
}

VecX ObjectPose::toVector() const {
  VecX v(kObjectParams);
  v.head<3>() = rot;
  v.tail<3>() = trans;
  return v;
}

ObjectPose ObjectPose::fromVector(const VecX& v) {
  if (v.size() != kObjectParams) throw InvalidInput("object pose vector must have 6 entries");
  return {v.head<3>(), v.tail<3>()};
}

bool ObjectPose::isFinite() const { return rot.allFinite() && trans.allFinite(); }

void HandModel::finalize(int phy_subsample_size) {
  const int v_count = vertexCount();
  if (v_count < 4) throw InvalidInput("hand model has too few vertices");
  if (rest_joints.rows() != kNumNodes || rest_joints.cols() != 3)
    throw InvalidInput("hand model rest_joints must be 16x3");
  if (skin_weights.rows() != v_count || skin_weights.cols() != kNumNodes)
    throw InvalidInput("hand model skin_weights must be Vx16");
  if (limits_lo.size() != kNumFingerAngles || limits_hi.size() != kNumFingerAngles)
    throw InvalidInput("hand model limits must have 45 entries");
  if (parents[0] != 0) throw InvalidInput("node 0 must be the root (parent 0)");
  for (int i = 1; i < kNumNodes; ++i) {
    if (parents[i] < 0 || parents[i] >= i)
      throw InvalidInput("parents must form a tree with ancestors before children");
  }
  for (int f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces(f, k) < 0 || faces(f, k) >= v_count)
        throw InvalidInput("face index out of range");
    }
  }
  for (int t : tips) {
    if (t < 0 || t >= v_count) throw InvalidInput("tip vertex index out of range");
  }
  for (int i = 0; i < kNumFingerAngles; ++i) {
    if (limits_lo[i] > limits_hi[i])
      throw InvalidInput("joint limit lower bound exceeds upper bound");
  }
  for (int v = 0; v < v_count; ++v) {
    double sum = 0;
    for (int j = 0; j < kNumNodes; ++j) {
      const double w = skin_weights(v, j);
      if (w < -1e-12) throw InvalidInput("negative skinning weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InvalidInput("skinning weights of a vertex do not sum to 1");
  }
  for (auto& d : shape_dirs) {
    if (d.rows() == 0) d = MatX::Zero(v_count, 3);
    if (d.rows() != v_count || d.cols() != 3)
      throw InvalidInput("shape_dirs blocks must be Vx3");
  }

  // Farthest-point subsample for the repulsion term, deterministic.
  phy_subsample.clear();
  const int m = std::min(phy_subsample_size, v_count);
  std::vector<double> dist(v_count, std::numeric_limits<double>::infinity());
  int current = 0;  // start from vertex 0
  for (int it = 0; it < m; ++it) {
    phy_subsample.push_back(current);
    int next = 0;
    double best = -1;
    for (int v = 0; v < v_count; ++v) {
      const double d =
          (template_vertices.row(v) - template_vertices.row(current)).squaredNorm();
      dist[v] = std::min(dist[v], d);
      if (dist[v] > best) {
        best = dist[v];
        next = v;
      }
    }
    current = next;
  }
}

MatX HandModel::shapedVertices(const ShapeParams& shape) const {
  MatX v = template_vertices;
  for (int b = 0; b < kNumShapeParams; ++b) {
    if (shape.beta[b] != 0.0 && shape_dirs[b].size() > 0) v += shape.beta[b] * shape_dirs[b];
  }
  return v;
}

namespace {

// World transforms G_i (without the global translation, which is added
// separately) and skinning transforms A_i = G_i * [I | -j_i].
void nodeTransforms(const HandModel& model, const HandPose& pose,
                    std::array<RigidTransform, kNumNodes>& node_world,
                    std::array<RigidTransform, kNumNodes>& skinning) {
  node_world[0].rot = rodrigues(pose.global_rot);
  node_world[0].trans = model.rest_joints.row(0).transpose();
  for (int i = 1; i < kNumNodes; ++i) {
    const int p = model.parents[i];
    RigidTransform local;
    local.rot = rodrigues(pose.angles.segment<3>(3 * (i - 1)));
    local.trans =
        (model.rest_joints.row(i) - model.rest_joints.row(p)).transpose();
    node_world[i] = node_world[p].compose(local);
  }
  for (int i = 0; i < kNumNodes; ++i) {
    skinning[i].rot = node_world[i].rot;
    skinning[i].trans =
        node_world[i].trans -
        node_world[i].rot * model.rest_joints.row(i).transpose();
  }
}

Vec3 skinOneVertex(const HandModel& model,
                   const std::array<RigidTransform, kNumNodes>& skinning,
                   const Vec3& shaped, int v) {
  Vec3 out = Vec3::Zero();
  for (int j = 0; j < kNumNodes; ++j) {
    const double w = model.skin_weights(v, j);
    if (w == 0.0) continue;
    out += w * skinning[j].apply(shaped);
  }
  return out;
}

}  // namespace

FKResult forwardKinematics(const HandModel& model, const HandPose& pose,
                           const ShapeParams& shape) {
  if (!pose.isFinite()) throw InvalidInput("non-finite hand pose");
  FKResult fk;
  nodeTransforms(model, pose, fk.node_world, fk.skinning);
  fk.global_trans = pose.global_trans;
  fk.joints21.resize(kNumKeypoints, 3);
  fk.joints21.row(0) = (fk.node_world[0].trans + pose.global_trans).transpose();
  for (int i = 1; i < kNumNodes; ++i) {
    fk.joints21.row(i) =
        (fk.node_world[i].trans + pose.global_trans).transpose();
  }
  const MatX shaped = model.shapedVertices(shape);
  for (int t = 0; t < 5; ++t) {
    const Vec3 tip = skinOneVertex(model, fk.skinning,
                                   shaped.row(model.tips[t]).transpose(),
                                   model.tips[t]) +
                     pose.global_trans;
    fk.joints21.row(kNumNodes + t) = tip.transpose();
  }
  return fk;
}

PosedMesh skin(const HandModel& model, const HandPose& pose,
               const ShapeParams& shape) {
  if (!pose.isFinite()) throw InvalidInput("non-finite hand pose");
  std::array<RigidTransform, kNumNodes> node_world, skinning;
  nodeTransforms(model, pose, node_world, skinning);
  const MatX shaped = model.shapedVertices(shape);
  PosedMesh mesh;
  mesh.faces = model.faces;
  mesh.vertices.resize(model.vertexCount(), 3);
  for (int v = 0; v < model.vertexCount(); ++v) {
    mesh.vertices.row(v) =
        (skinOneVertex(model, skinning, shaped.row(v).transpose(), v) +
         pose.global_trans)
            .transpose();
  }
  mesh.normals = vertexNormals(mesh.vertices, mesh.faces,
                               &mesh.degenerate_faces, &mesh.isolated_vertices);
  return mesh;
}

HandJacobians handJacobians(const HandModel& model, const HandPose& pose,
                            const ShapeParams& shape, bool with_shape) {
  if (!pose.isFinite()) throw InvalidInput("non-finite hand pose");
  std::array<RigidTransform, kNumNodes> node_world, skinning;
  nodeTransforms(model, pose, node_world, skinning);
  const MatX shaped = model.shapedVertices(shape);
  const int v_count = model.vertexCount();

  // Per-node posed positions q_i(v) = A_i * shaped_v, only for nodes with a
  // nonzero weight on v; and the blended vertex without global translation.
  // dA_i/dtheta = X_{m,k} A_i with X = [B | c], B = G_p dR G_m^-1 restricted
  // to the linear part, so d(vertex)/dtheta = sum_i w_i (B q_i + c).
  struct ParamOp {
    Mat3 lin;
    Vec3 off;
    int node;  // parameters of this node affect node and its descendants
  };
  std::vector<ParamOp> ops(48);  // 45 finger + 3 global rot
  // Finger angle parameters: node i >= 1, component k.
  // B = G_p.rot * dR_k * G_i.rot^T, c = -B * G_i.trans.
  for (int i = 1; i < kNumNodes; ++i) {
    const auto d_rot = rodriguesJacobian(pose.angles.segment<3>(3 * (i - 1)));
    const int p = model.parents[i];
    for (int k = 0; k < 3; ++k) {
      ParamOp& op = ops[3 * (i - 1) + k];
      op.lin = node_world[p].rot * d_rot[k] * node_world[i].rot.transpose();
      op.off = -(op.lin * node_world[i].trans);
      op.node = i;
    }
  }
  // Global rotation: node 0.
  {
    const auto d_rot = rodriguesJacobian(pose.global_rot);
    const Mat3 r0t = node_world[0].rot.transpose();
    for (int k = 0; k < 3; ++k) {
      ops[45 + k].lin = d_rot[k] * r0t;
      ops[45 + k].off = -(ops[45 + k].lin * node_world[0].trans);
      ops[45 + k].node = 0;
    }
  }

  // Ancestor masks: affects[param][node] for descendants.
  std::array<std::array<bool, kNumNodes>, kNumNodes> descendant{};
  for (int i = 0; i < kNumNodes; ++i) {
    int n = i;
    while (true) {
      descendant[n][i] = true;
      if (n == 0) break;
      n = model.parents[n];
    }
  }

  HandJacobians jac;
  jac.verts_pose = MatX::Zero(3 * v_count, kHandParams);
  jac.joints_pose = MatX::Zero(3 * kNumKeypoints, kHandParams);
  if (with_shape) {
    jac.verts_shape = MatX::Zero(3 * v_count, kNumShapeParams);
    jac.joints_shape = MatX::Zero(3 * kNumKeypoints, kNumShapeParams);
  }

  // Joint keypoints (wrist + 15 joints).
  for (int i = 0; i < kNumNodes; ++i) {
    const Vec3 pos = node_world[i].trans;
    for (int pi = 0; pi < 48; ++pi) {
      const auto& op = ops[pi];
      if (!descendant[op.node][i]) continue;
      const Vec3 d = op.lin * pos + op.off;
      const int col = (pi < 45) ? pi : (kNumFingerAngles + (pi - 45));
      jac.joints_pose.block<3, 1>(3 * i, col) = d;
    }
    jac.joints_pose.block<3, 3>(3 * i, kNumFingerAngles + 3).setIdentity();
  }

  // Vertices.
  for (int v = 0; v < v_count; ++v) {
    const Vec3 shaped_v = shaped.row(v).transpose();
    for (int j = 0; j < kNumNodes; ++j) {
      const double w = model.skin_weights(v, j);
      if (w == 0.0) continue;
      const Vec3 q = skinning[j].apply(shaped_v);
      for (int pi = 0; pi < 48; ++pi) {
        const auto& op = ops[pi];
        if (!descendant[op.node][j]) continue;
        const int col = (pi < 45) ? pi : (kNumFingerAngles + (pi - 45));
        jac.verts_pose.block<3, 1>(3 * v, col) += w * (op.lin * q + op.off);
      }
      if (with_shape) {
        for (int b = 0; b < kNumShapeParams; ++b) {
          if (model.shape_dirs[b].size() == 0) continue;
          jac.verts_shape.block<3, 1>(3 * v, b) +=
              w * (skinning[j].rot * model.shape_dirs[b].row(v).transpose());
        }
      }
    }
    jac.verts_pose.block<3, 3>(3 * v, kNumFingerAngles + 3).setIdentity();
  }

  // Tip keypoints reuse the vertex rows.
  for (int t = 0; t < 5; ++t) {
    jac.joints_pose.middleRows<3>(3 * (kNumNodes + t)) =
        jac.verts_pose.middleRows<3>(3 * model.tips[t]);
    if (with_shape) {
      jac.joints_shape.middleRows<3>(3 * (kNumNodes + t)) =
          jac.verts_shape.middleRows<3>(3 * model.tips[t]);
    }
  }
  return jac;
}

VecX limitViolations(const HandPose& pose, const HandModel& model) {
  VecX v(kNumFingerAngles);
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double a = pose.angles[i];
    v[i] = std::max(model.limits_lo[i] - a, 0.0) +
           std::max(a - model.limits_hi[i], 0.0);
  }
  return v;
}

VecX limitViolationsGradient(const HandPose& pose, const HandModel& model) {
  VecX g = VecX::Zero(kNumFingerAngles);
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double a = pose.angles[i];
    if (a < model.limits_lo[i]) g[i] = -1.0;
    else if (a > model.limits_hi[i]) g[i] = 1.0;
  }
  return g;
}

HandPose graspToWorld(const GraspPose& grasp, const ObjectPose& obj) {
  const RigidTransform obj_t = obj.transform();
  HandPose world;
  world.angles = grasp.angles;
  world.global_rot = rodriguesInverse(obj_t.rot * rodrigues(grasp.global_rot));
  world.global_trans = obj_t.apply(grasp.global_trans);
  return world;
}

GraspPose worldToGrasp(const HandPose& hand, const ObjectPose& obj) {
  const RigidTransform inv = obj.transform().inverse();
  GraspPose grasp;
  grasp.angles = hand.angles;
  grasp.global_rot = rodriguesInverse(inv.rot * rodrigues(hand.global_rot));
  grasp.global_trans = inv.apply(hand.global_trans);
  return grasp;
}

}  // namespace hoa
