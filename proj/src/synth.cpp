#include "hoa/synth.hpp"

#include "hoa/errors.hpp"
#include "hoa/parallel.hpp"
#include "hoa/render.hpp"
#include "hoa/rng.hpp"
#include "hoa/shapes.hpp"

#include <algorithm>
#include <cmath>

namespace hoa {
namespace {

const Vec3 kSceneCenter(0.0, 0.0, 0.55);

Camera lookAtCamera(const Vec3& position, const Vec3& target, double focal,
                    int width, int height) {
  Camera cam;
  cam.fx = cam.fy = focal;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  const Vec3 forward = (target - position).normalized();
  Vec3 up(0, -1, 0);  // image y grows downward
  Vec3 right = up.cross(forward);
  if (right.norm() < 1e-6) right = Vec3(1, 0, 0);
  right.normalize();
  up = forward.cross(right);
  Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = up;
  cam_to_world.col(2) = forward;
  cam.extrinsic.rot = cam_to_world.transpose();
  cam.extrinsic.trans = -(cam_to_world.transpose() * position);
  return cam;
}

CameraRig makeRig(const SynthConfig& config) {
  CameraRig rig;
  rig.reference = 0;
  // Camera 0 at the origin looking down +z; the reference extrinsic must be
  // the identity, which this arrangement satisfies by construction.
  for (int c = 0; c < config.cameras; ++c) {
    if (c == 0) {
      Camera cam;
      cam.fx = cam.fy = config.focal;
      cam.cx = config.width / 2.0;
      cam.cy = config.height / 2.0;
      cam.width = config.width;
      cam.height = config.height;
      rig.cameras.push_back(cam);
      continue;
    }
    // Remaining cameras on an arc around the scene center, alternating
    // sides with mild elevation changes.
    const int k = (c + 1) / 2;
    const double side = (c % 2 == 1) ? 1.0 : -1.0;
    const double yaw = side * 0.55 * k;         // radians
    const double elev = 0.18 * side * ((c % 3) - 1);
    const double radius = kSceneCenter.norm();
    const Vec3 offset(radius * std::sin(yaw) * std::cos(elev),
                      radius * std::sin(elev),
                      -radius * std::cos(yaw) * std::cos(elev));
    rig.cameras.push_back(lookAtCamera(kSceneCenter + offset, kSceneCenter,
                                       config.focal, config.width, config.height));
  }
  return rig;
}

TriMesh makeObject(const SynthConfig& config) {
  if (config.object_type == "box") {
    return makeBoxGrid(Vec3(config.object_size, config.object_size * 0.8,
                            config.object_size * 0.6),
                       9);
  }
  if (config.object_type == "cylinder") {
    return makeCylinder(config.object_size * 0.6, config.object_size * 2.0, 36);
  }
  if (config.object_type == "sphere") {
    return makeIcosphere(config.object_size, 3);
  }
  throw InvalidInput("unknown object type: " + config.object_type);
}

// A grasp pose (hand in object coordinates) that holds the palm under the
// object without touching it: palm normal +y points at the object. The
// curl and clearance are chosen so the fingertips stay a few millimeters
// clear of every object asset.
GraspPose baseGrasp(const HandModel& model, double object_size, Rng& rng) {
  GraspPose grasp;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double lo = model.limits_lo[i], hi = model.limits_hi[i];
    grasp.angles[i] = lo + (0.28 + 0.08 * rng.uniform()) * (hi - lo);
  }
  grasp.global_rot = 0.05 * rng.normalVec3();
  grasp.global_trans = Vec3(-0.055, -(object_size + 0.085), 0.005);
  return grasp;
}

ObjectPose objectPoseAt(const SynthConfig& config, int frame) {
  const double t = config.frames > 1
                       ? static_cast<double>(frame) / (config.frames - 1)
                       : 0.0;
  const double angle = config.object_rot_speed_deg * M_PI / 180.0 * frame;
  const Vec3 axis = Vec3(0.3, 1.0, 0.2).normalized();
  ObjectPose pose;
  pose.rot = axis * angle;
  pose.trans = kSceneCenter + config.object_trans_amp *
                                  Vec3(std::sin(2 * M_PI * t),
                                       0.5 * std::cos(2 * M_PI * t) - 0.5,
                                       0.3 * std::sin(4 * M_PI * t));
  return pose;
}

HandPose handOnlyPoseAt(const SynthConfig& config, const HandModel& model,
                        int frame) {
  const double t = config.frames > 1
                       ? static_cast<double>(frame) / (config.frames - 1)
                       : 0.0;
  HandPose pose;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    const double lo = model.limits_lo[i], hi = model.limits_hi[i];
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    pose.angles[i] = mid + 0.30 * half * std::sin(2 * M_PI * t + 0.37 * i);
  }
  pose.global_rot = Vec3(0.25 * std::sin(2 * M_PI * t), -0.6 + 0.2 * t,
                         0.15 * std::cos(2 * M_PI * t));
  pose.global_trans = kSceneCenter + Vec3(0.02 * std::sin(2 * M_PI * t),
                                          0.015 * std::cos(2 * M_PI * t),
                                          0.01 * std::sin(4 * M_PI * t)) -
                      Vec3(0.04, 0, 0);
  return pose;
}

void erodeMask(ImageU8& mask, int rounds) {
  for (int r = 0; r < rounds; ++r) {
    ImageU8 out = mask;
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        const uint8_t v = mask.at(x, y);
        if (v == kLabelBackground) continue;
        auto differs = [&](int xx, int yy) {
          return !mask.inside(xx, yy) || mask.at(xx, yy) != v;
        };
        if (differs(x - 1, y) || differs(x + 1, y) || differs(x, y - 1) ||
            differs(x, y + 1)) {
          out.at(x, y) = kLabelBackground;
        }
      }
    }
    mask = std::move(out);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (frames < 1) throw InvalidInput("synth: frames must be >= 1");
  if (cameras < 1) throw InvalidInput("synth: at least one camera required");
  if (width < 8 || height < 8) throw InvalidInput("synth: resolution too small");
  if (depth_noise < 0 || keypoint_noise < 0 || mask_erosion < 0)
    throw InvalidInput("synth: noise parameters must be non-negative");
  if (mode != "grasp" && mode != "hand_only")
    throw InvalidInput("synth: mode must be grasp or hand_only");
}

SynthResult generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);

  SynthResult out;
  out.models.hand = HandModel::makeSynthetic();
  if (config.mode == "grasp") out.models.object = makeObject(config);
  out.models.finalize();

  out.seq.rig = makeRig(config);
  out.gt.shape = config.shape;

  const GraspPose grasp = config.mode == "grasp"
                              ? baseGrasp(out.models.hand, config.object_size, rng)
                              : GraspPose{};

  // Ground-truth trajectories.
  for (int t = 0; t < config.frames; ++t) {
    if (config.mode == "grasp") {
      const ObjectPose obj = objectPoseAt(config, t);
      GraspPose g = grasp;
      if (config.grasp_perturb_amp > 0) {
        const double s = config.frames > 1
                             ? static_cast<double>(t) / (config.frames - 1)
                             : 0.0;
        for (int i = 0; i < kNumFingerAngles; ++i) {
          g.angles[i] += config.grasp_perturb_amp *
                         std::sin(2 * M_PI * s + 0.71 * i);
        }
      }
      out.gt.object.push_back(obj);
      out.gt.hand.push_back(graspToWorld(g, obj));
    } else {
      out.gt.object.push_back(ObjectPose{});
      out.gt.hand.push_back(handOnlyPoseAt(config, out.models.hand, t));
    }
  }

  // Render per frame, per camera.
  out.seq.frames.resize(config.frames);
  std::vector<Rng> frame_rngs;
  for (int t = 0; t < config.frames; ++t) {
    frame_rngs.emplace_back(config.seed * 0x100000001b3ULL + 0x9e37 + t);
  }
  parallelFor(config.frames, [&](int t) {
    Rng& frng = frame_rngs[t];
    const PosedMesh hand_mesh = skin(out.models.hand, out.gt.hand[t], config.shape);
    const PosedMesh obj_mesh = config.mode == "grasp"
                                   ? out.models.posedObject(out.gt.object[t])
                                   : PosedMesh{};
    const MatX joints =
        forwardKinematics(out.models.hand, out.gt.hand[t], config.shape).joints21;
    for (int c = 0; c < config.cameras; ++c) {
      const Camera& cam = out.seq.rig.cameras[c];
      const HardRaster hr = hardRasterize(hand_mesh, obj_mesh, cam);
      FrameObservation obs;
      obs.mask = hr.labels;
      obs.depth = ImageD(cam.width, cam.height, 0.0);
      for (int i = 0; i < cam.width * cam.height; ++i) {
        if (std::isfinite(hr.depth.data[i])) {
          double d = hr.depth.data[i];
          if (config.depth_noise > 0) d += config.depth_noise * frng.normal();
          obs.depth.data[i] = std::max(d, 0.05);
        }
      }
      if (config.mask_erosion > 0) erodeMask(obs.mask, config.mask_erosion);

      obs.keypoints.resize(21, 3);
      for (int i = 0; i < 21; ++i) {
        const Projection p = project(joints.row(i).transpose(), cam);
        double u = p.u, v = p.v, conf = 0.0;
        if (p.valid && u >= 0 && u < cam.width && v >= 0 && v < cam.height) {
          // Occlusion test against the rendered surface.
          const int px = std::clamp(static_cast<int>(u), 0, cam.width - 1);
          const int py = std::clamp(static_cast<int>(v), 0, cam.height - 1);
          const double surface = hr.depth.at(px, py);
          const bool occluded =
              std::isfinite(surface) && surface < p.z - 0.02;
          conf = occluded ? 0.3 * frng.uniform() : 1.0;
        }
        if (config.keypoint_noise > 0) {
          u += config.keypoint_noise * frng.normal();
          v += config.keypoint_noise * frng.normal();
        }
        obs.keypoints.row(i) << u, v, conf;
      }
      out.seq.frames[t].views.push_back(std::move(obs));
    }
  });

  // External object initialization, optionally perturbed from the truth.
  Rng irng(config.seed ^ 0xabcdef12345ULL);
  for (int t = 0; t < config.frames; ++t) {
    ObjectPose init = out.gt.object[t];
    if (config.init_object_rot_deg > 0) {
      const double a = config.init_object_rot_deg * M_PI / 180.0;
      init.rot = rodriguesInverse(rodrigues(irng.unitVec3() * a) * rodrigues(init.rot));
    }
    if (config.init_object_trans > 0) {
      init.trans += irng.unitVec3() * config.init_object_trans;
    }
    out.object_init.push_back(init);
  }
  return out;
}

double fscore(const MatX& predicted, const MatX& reference, double threshold) {
  if (predicted.rows() == 0 || reference.rows() == 0) return 0.0;
  const VertexGrid ref_grid(reference);
  const VertexGrid pred_grid(predicted);
  int precise = 0;
  for (int i = 0; i < predicted.rows(); ++i) {
    const Vec3 p = predicted.row(i).transpose();
    const int j = ref_grid.nearest(p);
    if ((reference.row(j).transpose() - p).norm() <= threshold) ++precise;
  }
  int recalled = 0;
  for (int i = 0; i < reference.rows(); ++i) {
    const Vec3 p = reference.row(i).transpose();
    const int j = pred_grid.nearest(p);
    if ((predicted.row(j).transpose() - p).norm() <= threshold) ++recalled;
  }
  const double precision = static_cast<double>(precise) / predicted.rows();
  const double recall = static_cast<double>(recalled) / reference.rows();
  if (precision + recall <= 0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

Metrics evaluate(const AnnotationResult& result, const AnnotationResult& gt,
                 const SceneModels& models) {
  if (result.hand.size() != gt.hand.size() || result.object.size() != gt.object.size())
    throw InvalidInput("evaluate: frame count mismatch");
  const int n = static_cast<int>(result.hand.size());

  Metrics m;
  m.frames.resize(n);
  parallelFor(n, [&](int t) {
    FrameMetrics& fm = m.frames[t];
    const MatX je = forwardKinematics(models.hand, result.hand[t], result.shape).joints21;
    const MatX jg = forwardKinematics(models.hand, gt.hand[t], gt.shape).joints21;
    fm.joint_err = (je - jg).rowwise().norm().mean();
    const MatX je_rel = je.rowwise() - je.row(0);
    const MatX jg_rel = jg.rowwise() - jg.row(0);
    fm.joint_err_root = (je_rel - jg_rel).rowwise().norm().mean();

    const MatX ve = skin(models.hand, result.hand[t], result.shape).vertices;
    const MatX vg = skin(models.hand, gt.hand[t], gt.shape).vertices;
    fm.hand_mesh_err = (ve - vg).rowwise().norm().mean();

    // Similarity (Procrustes) alignment of the predicted hand mesh.
    const Eigen::Matrix4d sim = Eigen::umeyama(ve.transpose(), vg.transpose(), true);
    MatX aligned(ve.rows(), 3);
    for (int v = 0; v < ve.rows(); ++v) {
      const Eigen::Vector4d h(ve(v, 0), ve(v, 1), ve(v, 2), 1.0);
      aligned.row(v) = (sim * h).head<3>().transpose();
    }
    fm.procrustes_err = (aligned - vg).rowwise().norm().mean();
    fm.f5 = fscore(ve, vg, 0.005);
    fm.f15 = fscore(ve, vg, 0.015);

    if (models.hasObject()) {
      const MatX oe = models.posedObject(result.object[t]).vertices;
      const MatX og = models.posedObject(gt.object[t]).vertices;
      fm.obj_mesh_err = (oe - og).rowwise().norm().mean();
    }
    fm.obj_trans_err = (result.object[t].trans - gt.object[t].trans).norm();
    const Mat3 dr = rodrigues(result.object[t].rot).transpose() * rodrigues(gt.object[t].rot);
    fm.obj_rot_err_deg = rodriguesInverse(dr).norm() * 180.0 / M_PI;
  });

  auto& mean = m.mean;
  for (const FrameMetrics& fm : m.frames) {
    mean.joint_err += fm.joint_err / n;
    mean.joint_err_root += fm.joint_err_root / n;
    mean.hand_mesh_err += fm.hand_mesh_err / n;
    mean.obj_mesh_err += fm.obj_mesh_err / n;
    mean.procrustes_err += fm.procrustes_err / n;
    mean.f5 += fm.f5 / n;
    mean.f15 += fm.f15 / n;
    mean.obj_trans_err += fm.obj_trans_err / n;
    mean.obj_rot_err_deg += fm.obj_rot_err_deg / n;
  }
  return m;
}

}  // namespace hoa
