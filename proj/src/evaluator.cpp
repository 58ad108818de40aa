#include "hoa/evaluator.hpp"

#include "hoa/errors.hpp"
#include "hoa/parallel.hpp"

#include <cmath>

namespace hoa {

void SceneModels::finalize() {
  hand.finalize();
  if (object.vertexCount() > 0) {
    object_rest_normals = vertexNormals(object.vertices, object.faces);
  } else {
    object_rest_normals.resize(0, 3);
  }
}

PosedMesh SceneModels::posedObject(const ObjectPose& pose) const {
  PosedMesh out;
  out.faces = object.faces;
  const RigidTransform t = pose.transform();
  out.vertices.resize(object.vertexCount(), 3);
  out.normals.resize(object.vertexCount(), 3);
  for (int v = 0; v < object.vertexCount(); ++v) {
    out.vertices.row(v) = t.apply(object.vertices.row(v)).transpose();
    out.normals.row(v) = (t.rot * object_rest_normals.row(v).transpose()).transpose();
  }
  return out;
}

void SequenceData::buildClouds(double max_range, int max_points) {
  for (auto& frame : frames) {
    std::vector<LabeledCloud> per_cam;
    per_cam.reserve(frame.views.size());
    for (size_t c = 0; c < frame.views.size(); ++c) {
      per_cam.push_back(backproject(frame.views[c], rig.cameras[c], max_range));
    }
    LabeledCloud merged = mergeClouds(per_cam, rig);
    if (max_points > 0 && merged.count() > max_points) {
      // Deterministic stride subsample.
      const double stride = static_cast<double>(merged.count()) / max_points;
      LabeledCloud sub;
      sub.points.resize(max_points, 3);
      sub.labels.resize(max_points);
      for (int i = 0; i < max_points; ++i) {
        const int j = static_cast<int>(i * stride);
        sub.points.row(i) = merged.points.row(j);
        sub.labels[i] = merged.labels[j];
      }
      merged = std::move(sub);
    }
    frame.cloud = std::move(merged);
  }
}

SequenceData SequenceData::downscaled(int factor) const {
  if (factor <= 1) return *this;
  SequenceData out;
  out.rig.reference = rig.reference;
  for (const auto& cam : rig.cameras) out.rig.cameras.push_back(cam.downscaled(factor));
  out.frames.resize(frames.size());
  for (size_t f = 0; f < frames.size(); ++f) {
    for (const auto& view : frames[f].views) {
      out.frames[f].views.push_back(view.downscaled(factor));
    }
    out.frames[f].cloud = frames[f].cloud;  // clouds stay full fidelity
  }
  return out;
}

void SequenceData::validate() const {
  rig.validate();
  for (const auto& frame : frames) {
    if (frame.views.size() != rig.cameras.size())
      throw InvalidInput("frame does not have one observation per camera");
    for (size_t c = 0; c < frame.views.size(); ++c) {
      frame.views[c].validate();
      if (!frame.views[c].mask.sameSize(rig.cameras[c].width, rig.cameras[c].height))
        throw InvalidInput("observation resolution does not match camera");
    }
  }
}

VecX packFrameParams(const HandPose& hand, const ObjectPose& obj) {
  VecX x(kHandParams + kObjectParams);
  x.head<kHandParams>() = hand.toVector();
  x.tail<kObjectParams>() = obj.toVector();
  return x;
}

void unpackFrameParams(const VecX& x, HandPose* hand, ObjectPose* obj) {
  if (hand) *hand = HandPose::fromVector(x.head<kHandParams>());
  if (obj) *obj = ObjectPose::fromVector(x.tail<kObjectParams>());
}

FrameEnergy::FrameEnergy(const SceneModels& models, const CameraRig& rig,
                         const FrameData& frame, const EnergyWeights& weights)
    : models_(&models), rig_(&rig), frame_(&frame), weights_(weights) {}

double FrameEnergy::eval(Mode mode, const VecX& params,
                         const ShapeParams& shape, VecX* grad,
                         EnergyBreakdown* breakdown, VecX* grad_shape) const {
  const EnergyWeights& w = weights_;
  const bool want_grad = grad != nullptr;
  const bool want_shape_grad = grad_shape != nullptr;
  if (params.size() != kHandParams + kObjectParams)
    throw InvalidInput("FrameEnergy: parameter block must have 57 entries");

  HandPose local_pose = HandPose::fromVector(params.head<kHandParams>());
  const ObjectPose obj_pose = ObjectPose::fromVector(params.tail<kObjectParams>());
  if (!local_pose.isFinite() || !obj_pose.isFinite())
    throw OptimFailure("energy evaluation at non-finite parameters");

  const bool render_terms = w.alpha > 0 || w.beta > 0;
  const bool need_hand_mesh = render_terms || w.delta > 0 || w.zeta > 0;
  const bool need_joints = w.gamma > 0;

  // Hand geometry in its own frame (world for Mode::World, object frame
  // for Mode::Grasp), then mapped through the object transform if needed.
  PosedMesh hand_mesh;
  MatX joints21;
  HandJacobians jac;
  if (need_hand_mesh || want_shape_grad) hand_mesh = skin(models_->hand, local_pose, shape);
  if (need_joints) joints21 = forwardKinematics(models_->hand, local_pose, shape).joints21;
  else joints21.resize(0, 3);
  if (want_grad || want_shape_grad) {
    jac = handJacobians(models_->hand, local_pose, shape, want_shape_grad);
  }

  const RigidTransform obj_t = obj_pose.transform();
  std::array<Mat3, 3> obj_rot_jac;
  if (want_grad) obj_rot_jac = rodriguesJacobian(obj_pose.rot);

  // Map hand geometry to world for Grasp mode. Keep the object-frame copy
  // for the gradient chain.
  MatX hand_verts_local, joints_local;
  if (mode == Mode::Grasp) {
    hand_verts_local = hand_mesh.vertices;
    joints_local = joints21;
    for (int v = 0; v < hand_mesh.vertexCount(); ++v) {
      hand_mesh.vertices.row(v) = obj_t.apply(hand_mesh.vertices.row(v)).transpose();
    }
    if (hand_mesh.normals.rows() > 0) hand_mesh.normals = hand_mesh.normals * obj_t.rot.transpose();
    for (int i = 0; i < joints21.rows(); ++i) {
      joints21.row(i) = obj_t.apply(joints21.row(i)).transpose();
    }
  }

  PosedMesh obj_mesh;
  if (models_->hasObject() && (render_terms || w.delta > 0 || w.zeta > 0)) {
    obj_mesh = models_->posedObject(obj_pose);
  }

  EnergyBreakdown bd;
  // Accumulated gradients w.r.t. world-space mesh quantities.
  MatX d_hand_verts = MatX::Zero(hand_mesh.vertexCount(), 3);
  MatX d_obj_verts = MatX::Zero(obj_mesh.vertexCount(), 3);
  MatX d_obj_normals = MatX::Zero(obj_mesh.vertexCount(), 3);
  MatX d_joints = MatX::Zero(joints21.rows(), 3);

  // Camera-indexed terms, evaluated in parallel into slots.
  const int ncams = rig_->count();
  struct CamSlot {
    double mask = 0, dpt = 0, j2d = 0;
    MatX d_hand, d_obj, d_joints;
  };
  std::vector<CamSlot> slots(ncams);
  parallelFor(ncams, [&](int c) {
    CamSlot& slot = slots[c];
    const Camera& cam = rig_->cameras[c];
    const FrameObservation& obs = frame_->views[c];
    if (render_terms) {
      const RenderOutput ro = render(hand_mesh, obj_mesh, cam, w.sharpness);
      const bool any_grad = want_grad || want_shape_grad;
      ImageD d_sh, d_so, d_depth;
      if (w.alpha > 0) {
        slot.mask = eMask(obs, ro, any_grad ? &d_sh : nullptr,
                          any_grad ? &d_so : nullptr);
      }
      if (w.beta > 0) {
        slot.dpt = eDpt(obs, ro, w.tukey_c, any_grad ? &d_depth : nullptr);
      }
      if (want_grad || want_shape_grad) {
        // Scale pixel gradients by the term weights once, then backward.
        if (d_sh.size()) {
          for (auto& v : d_sh.data) v *= w.alpha;
          for (auto& v : d_so.data) v *= w.alpha;
        }
        if (d_depth.size()) {
          for (auto& v : d_depth.data) v *= w.beta;
        }
        ro.backward(d_sh, d_so, d_depth, slot.d_hand, slot.d_obj);
      }
    }
    if (w.gamma > 0) {
      MatX dj;
      slot.j2d = eJ2d(obs, cam, joints21, (want_grad || want_shape_grad) ? &dj : nullptr);
      if (dj.size()) slot.d_joints = w.gamma * dj;
    }
  });
  for (const auto& slot : slots) {
    bd.mask += slot.mask;
    bd.dpt += slot.dpt;
    bd.j2d += slot.j2d;
    if (slot.d_hand.size()) d_hand_verts += slot.d_hand;
    if (slot.d_obj.size()) d_obj_verts += slot.d_obj;
    if (slot.d_joints.size()) d_joints += slot.d_joints;
  }

  if (w.delta > 0 && frame_->cloud.count() > 0) {
    MeshGrad gh, go;
    bd.e3d = e3d(frame_->cloud, hand_mesh, obj_mesh,
                 (want_grad || want_shape_grad) ? &gh : nullptr,
                 want_grad ? &go : nullptr);
    if (gh.d_verts.size()) d_hand_verts += w.delta * gh.d_verts;
    if (go.d_verts.size()) d_obj_verts += w.delta * go.d_verts;
  }

  if (w.zeta > 0 && models_->hasObject()) {
    MeshGrad gh, go;
    bd.phy = ePhy(hand_mesh, obj_mesh, models_->hand.phy_subsample, w.w_phy,
                  (want_grad || want_shape_grad) ? &gh : nullptr,
                  want_grad ? &go : nullptr);
    if (gh.d_verts.size()) d_hand_verts += w.zeta * gh.d_verts;
    if (go.d_verts.size()) d_obj_verts += w.zeta * go.d_verts;
    if (go.d_normals.size()) d_obj_normals += w.zeta * go.d_normals;
  }

  if (w.epsilon > 0) {
    bd.joint = limitViolations(local_pose, models_->hand).sum();
  }

  bd.total = bd.weightedSum(w);
  const std::string bad = bd.firstNonFinite();
  if (!bad.empty()) throw OptimFailure("energy term '" + bad + "' became non-finite");
  if (breakdown) *breakdown = bd;

  if (!want_grad && !want_shape_grad) return bd.total;

  // ---- Chain mesh/joint gradients to the parameter block. ----
  if (want_grad) grad->setZero(kHandParams + kObjectParams);

  // For Grasp mode the hand-vertex gradients must be expressed in the
  // object frame before applying the hand Jacobians, and they also pull on
  // the object transform.
  MatX d_hand_local = d_hand_verts;
  MatX d_joints_local = d_joints;
  if (mode == Mode::Grasp) {
    for (int v = 0; v < d_hand_local.rows(); ++v) {
      const Vec3 g = d_hand_verts.row(v).transpose();
      d_hand_local.row(v) = (obj_t.rot.transpose() * g).transpose();
      if (!want_grad) continue;
      (*grad).tail<3>() += g;  // d(world)/d(obj trans) = I
      for (int k = 0; k < 3; ++k) {
        (*grad)[kHandParams + k] +=
            g.dot(obj_rot_jac[k] * hand_verts_local.row(v).transpose());
      }
    }
    for (int i = 0; i < d_joints.rows(); ++i) {
      const Vec3 g = d_joints.row(i).transpose();
      d_joints_local.row(i) = (obj_t.rot.transpose() * g).transpose();
      if (!want_grad) continue;
      (*grad).tail<3>() += g;
      for (int k = 0; k < 3; ++k) {
        (*grad)[kHandParams + k] += g.dot(obj_rot_jac[k] * joints_local.row(i).transpose());
      }
    }
  }

  if (want_grad) {
    // Hand parameters.
    if (d_hand_local.rows() > 0) {
      VecX gv(3 * d_hand_local.rows());
      for (int v = 0; v < d_hand_local.rows(); ++v) {
        gv.segment<3>(3 * v) = d_hand_local.row(v).transpose();
      }
      grad->head<kHandParams>() += jac.verts_pose.transpose() * gv;
    }
    if (d_joints_local.rows() > 0) {
      VecX gj(3 * d_joints_local.rows());
      for (int i = 0; i < d_joints_local.rows(); ++i) {
        gj.segment<3>(3 * i) = d_joints_local.row(i).transpose();
      }
      grad->head<kHandParams>() += jac.joints_pose.transpose() * gj;
    }
    if (w.epsilon > 0) {
      grad->head<kNumFingerAngles>() +=
          w.epsilon * limitViolationsGradient(local_pose, models_->hand);
    }
    // Object parameters from the object mesh itself.
    for (int v = 0; v < d_obj_verts.rows(); ++v) {
      const Vec3 g = d_obj_verts.row(v).transpose();
      if (g.isZero(0)) continue;
      (*grad).tail<3>() += g;
      for (int k = 0; k < 3; ++k) {
        (*grad)[kHandParams + k] +=
            g.dot(obj_rot_jac[k] * models_->object.vertices.row(v).transpose());
      }
    }
    for (int v = 0; v < d_obj_normals.rows(); ++v) {
      const Vec3 g = d_obj_normals.row(v).transpose();
      if (g.isZero(0)) continue;
      for (int k = 0; k < 3; ++k) {
        (*grad)[kHandParams + k] +=
            g.dot(obj_rot_jac[k] * models_->object_rest_normals.row(v).transpose());
      }
    }
  }

  if (want_shape_grad) {
    grad_shape->setZero(kNumShapeParams);
    if (d_hand_local.rows() > 0 && jac.verts_shape.size() > 0) {
      VecX gv(3 * d_hand_local.rows());
      for (int v = 0; v < d_hand_local.rows(); ++v) {
        gv.segment<3>(3 * v) = d_hand_local.row(v).transpose();
      }
      *grad_shape += jac.verts_shape.transpose() * gv;
    }
    if (d_joints_local.rows() > 0 && jac.joints_shape.size() > 0) {
      VecX gj(3 * d_joints_local.rows());
      for (int i = 0; i < d_joints_local.rows(); ++i) {
        gj.segment<3>(3 * i) = d_joints_local.row(i).transpose();
      }
      *grad_shape += jac.joints_shape.transpose() * gj;
    }
  }
  return bd.total;
}

}  // namespace hoa
