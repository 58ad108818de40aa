#include "hoa/stages.hpp"

#include "hoa/errors.hpp"
#include "hoa/parallel.hpp"
#include "hoa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace hoa {
namespace {

constexpr int kBatchOverlap = 2;  // frames shared between refinement batches
constexpr double kBehindCameraMargin = 0.05;  // meters in front of the camera

// Wrist-rotation seeds for multi-start keypoint fits.
std::array<Vec3, 4> rotationSeeds() {
  return {Vec3(0, 0, 0), Vec3(M_PI, 0, 0), Vec3(0, M_PI, 0), Vec3(0, 0, M_PI)};
}

// Weak-perspective depth from keypoint spread vs the rest-pose skeleton.
double depthFromSpread(const HandModel& model, const FrameObservation& obs,
                       const Camera& cam) {
  const MatX rest = forwardKinematics(model, {}, {}).joints21;
  const Vec3 c3 = rest.colwise().mean().transpose();
  double spread3 = 0;
  for (int i = 0; i < rest.rows(); ++i) spread3 += (rest.row(i).transpose() - c3).squaredNorm();
  spread3 = std::sqrt(spread3 / rest.rows());

  Vec2 c2 = Vec2::Zero();
  double wsum = 0;
  for (int i = 0; i < 21; ++i) {
    const double w = obs.keypoints(i, 2);
    c2 += w * Vec2(obs.keypoints(i, 0), obs.keypoints(i, 1));
    wsum += w;
  }
  if (wsum <= 0) return 0.5;
  c2 /= wsum;
  double spread2 = 0;
  for (int i = 0; i < 21; ++i) {
    const double w = obs.keypoints(i, 2);
    spread2 += w * (Vec2(obs.keypoints(i, 0), obs.keypoints(i, 1)) - c2).squaredNorm();
  }
  spread2 = std::sqrt(spread2 / wsum);
  if (spread2 < 1e-6) return 0.5;
  return std::clamp(0.5 * (cam.fx + cam.fy) * spread3 / spread2, 0.1, 3.0);
}

// Least-squares intersection of the wrist keypoint rays; falls back to a
// spread-based depth along the first usable ray.
Vec3 estimateWristPosition(const HandModel& model,
                           const std::vector<FrameObservation>& views,
                           const CameraRig& rig) {
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  int used = 0;
  for (int c = 0; c < rig.count(); ++c) {
    const double conf = views[c].keypoints(0, 2);
    if (conf <= 0) continue;
    const RigidTransform cam_to_world = rig.cameras[c].extrinsic.inverse();
    const Vec3 dir =
        (cam_to_world.rot *
         pixelRay(views[c].keypoints(0, 0), views[c].keypoints(0, 1), rig.cameras[c]))
            .normalized();
    const Vec3 origin = cam_to_world.trans;
    const Mat3 m = Mat3::Identity() - dir * dir.transpose();
    a += conf * m;
    b += conf * m * origin;
    ++used;
  }
  if (used >= 2) {
    const Vec3 x = a.ldlt().solve(b);
    if (x.allFinite() && (a * x - b).norm() < 1e-6 * std::max(1.0, b.norm())) {
      return x;
    }
  }
  // Monocular fallback: scale the first usable ray by the spread depth.
  for (int c = 0; c < rig.count(); ++c) {
    if (views[c].keypoints(0, 2) <= 0) continue;
    const double z = depthFromSpread(model, views[c], rig.cameras[c]);
    const RigidTransform cam_to_world = rig.cameras[c].extrinsic.inverse();
    return cam_to_world.apply(
        z * pixelRay(views[c].keypoints(0, 0), views[c].keypoints(0, 1), rig.cameras[c]));
  }
  return Vec3(0, 0, 0.5);
}

HandPose midLimitPose(const HandModel& model) {
  HandPose p;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    p.angles[i] = 0.5 * (model.limits_lo[i] + model.limits_hi[i]);
  }
  return p;
}

// Residuals of the keypoint + joint-limit objective for a set of frames
// with shared finger angles. The limit part enters as sqrt-weighted
// violation residuals so the problem stays least-squares shaped.
struct KeypointFitProblem {
  const HandModel* model;
  struct View {
    const FrameObservation* obs;
    const Camera* cam;
    int frame;  // local frame index within the fit
  };
  std::vector<View> views;
  int frame_count = 1;
  double nu = 50.0;
  double limit_scale = 1.0;  // frame multiplicity of the shared limit term

  int paramCount() const { return kNumFingerAngles + 6 * frame_count; }
  int residualCount() const {
    return static_cast<int>(views.size()) * 42 + kNumFingerAngles;
  }

  HandPose framePose(const VecX& x, int frame) const {
    HandPose p;
    p.angles = x.head<kNumFingerAngles>();
    p.global_rot = x.segment<3>(kNumFingerAngles + 6 * frame);
    p.global_trans = x.segment<3>(kNumFingerAngles + 6 * frame + 3);
    return p;
  }

  void operator()(const VecX& x, VecX* r, MatX* jac) const {
    r->setZero(residualCount());
    if (jac) jac->setZero(residualCount(), paramCount());
    std::vector<MatX> joints(frame_count), jac_joints(frame_count);
    for (int f = 0; f < frame_count; ++f) {
      const HandPose pose = framePose(x, f);
      joints[f] = forwardKinematics(*model, pose, {}).joints21;
      if (jac) jac_joints[f] = handJacobians(*model, pose, {}).joints_pose;
    }
    int row = 0;
    for (const View& view : views) {
      const MatX& j21 = joints[view.frame];
      for (int i = 0; i < 21; ++i) {
        const double conf = view.obs->keypoints(i, 2);
        if (conf <= 0) {
          row += 2;
          continue;
        }
        const Projection p = project(j21.row(i).transpose(), *view.cam, jac != nullptr);
        if (!p.valid || p.z < kBehindCameraMargin) {
          // A depth barrier replaces the reprojection rows; otherwise
          // poses behind the camera would zero the cost by exclusion.
          const double barrier = view.cam->fx * (kBehindCameraMargin - p.z);
          (*r)[row] = barrier;
          if (jac) {
            const Vec3 dz = view.cam->extrinsic.rot.row(2).transpose();
            const MatX dj = jac ? jac_joints[view.frame].middleRows<3>(3 * i) : MatX();
            const MatX dbarrier = -view.cam->fx * (dz.transpose() * dj);  // 1 x 51
            jac->block(row, 0, 1, kNumFingerAngles) = dbarrier.leftCols(kNumFingerAngles);
            jac->block(row, kNumFingerAngles + 6 * view.frame, 1, 6) = dbarrier.rightCols(6);
          }
          row += 2;
          continue;
        }
        const double w = std::sqrt(conf);
        (*r)[row] = w * (p.u - view.obs->keypoints(i, 0));
        (*r)[row + 1] = w * (p.v - view.obs->keypoints(i, 1));
        if (jac) {
          const MatX dj = jac_joints[view.frame].middleRows<3>(3 * i);  // 3 x 51
          const MatX duv = w * (p.jac * dj);                            // 2 x 51
          jac->block(row, 0, 2, kNumFingerAngles) = duv.leftCols(kNumFingerAngles);
          jac->block(row, kNumFingerAngles + 6 * view.frame, 2, 6) = duv.rightCols(6);
        }
        row += 2;
      }
    }
    const double s = std::sqrt(nu * limit_scale);
    for (int i = 0; i < kNumFingerAngles; ++i) {
      const double ai = x[i];
      double v = 0, dv = 0;
      if (ai < model->limits_lo[i]) {
        v = model->limits_lo[i] - ai;
        dv = -1;
      } else if (ai > model->limits_hi[i]) {
        v = ai - model->limits_hi[i];
        dv = 1;
      }
      (*r)[row] = s * v;
      if (jac) (*jac)(row, i) = s * dv;
      ++row;
    }
  }
};

void applyInitPerturbation(HandPose& hand, ObjectPose& object,
                           const StageConfig& config) {
  if (config.init_perturb_rot_deg == 0 && config.init_perturb_trans == 0 &&
      config.init_perturb_joint == 0) {
    return;
  }
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const double rot_rad = config.init_perturb_rot_deg * M_PI / 180.0;
  hand.global_rot = rodriguesInverse(rodrigues(rng.unitVec3() * rot_rad) *
                                     rodrigues(hand.global_rot));
  hand.global_trans += rng.unitVec3() * config.init_perturb_trans;
  for (int i = 0; i < kNumFingerAngles; ++i) {
    hand.angles[i] += config.init_perturb_joint * rng.normal();
  }
  object.rot = rodriguesInverse(rodrigues(rng.unitVec3() * rot_rad) *
                                rodrigues(object.rot));
  object.trans += rng.unitVec3() * config.init_perturb_trans;
}

// E_tc contribution and gradient for the per-frame tracking objective.
double temporalTerm(const VecX& cur, const std::vector<VecX>& history,
                    double eta, VecX* grad) {
  if (history.empty() || eta == 0) return 0.0;
  const VecX& prev = history.back();
  const VecX prev2 = history.size() >= 2 ? history[history.size() - 2] : VecX();
  VecX d_cur;
  const double tc = eTc(cur, prev, prev2, grad ? &d_cur : nullptr);
  if (grad) *grad += eta * d_cur;
  return tc;
}

std::vector<ObjectPose> broadcastObjectInit(const std::vector<ObjectPose>& init,
                                            int frames) {
  if (init.empty()) throw InvalidInput("object initialization is required");
  if (static_cast<int>(init.size()) == frames) return init;
  if (init.size() == 1) return std::vector<ObjectPose>(frames, init[0]);
  throw InvalidInput("object init must have 1 pose or one per frame");
}

StageSnapshot makeSnapshot(const std::string& name,
                           const std::vector<HandPose>& hand,
                           const std::vector<ObjectPose>& object) {
  return {name, hand, object};
}

}  // namespace

void StageConfig::validate() const {
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (iterations < 1) throw InvalidInput("iterations must be >= 1");
  if (omega_size < 1) throw InvalidInput("omega_size must be >= 1");
  if (downscale < 1) throw InvalidInput("downscale must be >= 1");
  if (learning_rate <= 0) throw InvalidInput("learning_rate must be positive");
  weights.validate();
}

HandPose initMulticam(const std::vector<FrameObservation>& frame0_views,
                      const HandModel& model, const CameraRig& rig,
                      const EnergyWeights& weights) {
  if (frame0_views.size() != static_cast<size_t>(rig.count()))
    throw InvalidInput("initMulticam: one observation per camera required");
  double conf_sum = 0;
  for (const auto& v : frame0_views) conf_sum += v.keypoints.col(2).sum();
  if (conf_sum <= 0)
    throw OptimFailure("initMulticam: all keypoint confidences are zero");

  KeypointFitProblem prob;
  prob.model = &model;
  prob.frame_count = 1;
  prob.nu = weights.nu;
  for (int c = 0; c < rig.count(); ++c) {
    prob.views.push_back({&frame0_views[c], &rig.cameras[c], 0});
  }

  const Vec3 wrist = estimateWristPosition(model, frame0_views, rig);
  const HandPose base = midLimitPose(model);

  TrustRegionConfig tr;
  tr.max_iterations = 100;
  VecX best_x;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const Vec3& seed_rot : rotationSeeds()) {
    VecX x(prob.paramCount());
    x.head<kNumFingerAngles>() = base.angles;
    x.segment<3>(kNumFingerAngles) = seed_rot;
    x.tail<3>() = wrist - rodrigues(seed_rot) * model.rest_joints.row(0).transpose();
    const TrustRegionResult res = trustRegionMinimize(std::cref(prob), x, tr);
    if (res.final_cost < best_cost) {
      best_cost = res.final_cost;
      best_x = res.params;
    }
  }
  return prob.framePose(best_x, 0);
}

TrackResult trackSingleFrame(const SceneModels& models, const SequenceData& seq,
                             int frame, const HandPose& init_hand,
                             const ObjectPose& init_object,
                             const std::vector<VecX>& history,
                             const StageConfig& config,
                             const ShapeParams& shape) {
  const FrameEnergy fe(models, seq.rig, seq.frames[frame], config.weights);
  TrackResult out;
  const Objective objective = [&](const VecX& x, VecX* g) {
    EnergyBreakdown bd;
    double total = fe.eval(FrameEnergy::Mode::World, x, shape, g, &bd);
    const double tc = temporalTerm(x, history, config.weights.eta, g);
    bd.tc = tc;
    bd.total += config.weights.eta * tc;
    total += config.weights.eta * tc;
    out.log.push_back(bd);
    return total;
  };
  AdamConfig ac;
  ac.iterations = config.iterations;
  ac.learning_rate = config.learning_rate;
  ac.lr_decay = config.lr_decay;
  try {
    const AdamResult res =
        adamMinimize(objective, packFrameParams(init_hand, init_object), ac);
    unpackFrameParams(res.params, &out.hand, &out.object);
    out.ok = true;
  } catch (const OptimFailure&) {
    out.hand = init_hand;
    out.object = init_object;
    out.ok = false;
  }
  return out;
}

void refineMultiframe(const SceneModels& models, const SequenceData& seq,
                      std::vector<HandPose>& hand,
                      std::vector<ObjectPose>& object,
                      const StageConfig& config, StageLog* log,
                      const ShapeParams& shape) {
  const int n = seq.frameCount();
  if (static_cast<int>(hand.size()) != n || static_cast<int>(object.size()) != n)
    throw InvalidInput("refineMultiframe: one init pose pair per frame required");
  if (log) log->stage = "refine";

  std::vector<FrameEnergy> energies;
  energies.reserve(n);
  for (int t = 0; t < n; ++t) {
    energies.emplace_back(models, seq.rig, seq.frames[t], config.weights);
  }

  int start = 0;
  while (start < n) {
    const int end = std::min(start + config.batch_size, n);
    const int count = end - start;

    VecX x(57 * count);
    for (int t = start; t < end; ++t) {
      x.segment<57>(57 * (t - start)) = packFrameParams(hand[t], object[t]);
    }
    // Fixed history from already-refined frames before the batch.
    std::vector<VecX> history;
    if (start >= 2) history.push_back(packFrameParams(hand[start - 2], object[start - 2]));
    if (start >= 1) history.push_back(packFrameParams(hand[start - 1], object[start - 1]));

    const Objective objective = [&](const VecX& xb, VecX* g) {
      if (g) g->setZero(xb.size());
      struct Slot {
        EnergyBreakdown bd;
        VecX grad;
      };
      std::vector<Slot> slots(count);
      parallelFor(count, [&](int i) {
        energies[start + i].eval(FrameEnergy::Mode::World,
                                 xb.segment<57>(57 * i), shape,
                                 g ? &slots[i].grad : nullptr, &slots[i].bd);
      });
      EnergyBreakdown sum;
      for (int i = 0; i < count; ++i) {
        sum.add(slots[i].bd);
        if (g) g->segment<57>(57 * i) += slots[i].grad;
      }
      // Temporal coupling inside the batch plus the fixed boundary.
      auto sliceOf = [&](int tt) -> VecX {
        if (tt >= start) return xb.segment<57>(57 * (tt - start));
        const int h = static_cast<int>(history.size()) - (start - tt);
        return h >= 0 ? history[h] : VecX();
      };
      double tc_total = 0;
      for (int i = 0; i < count; ++i) {
        const int t = start + i;
        if (t == 0) continue;
        const VecX prev = sliceOf(t - 1);
        const VecX prev2 = t >= 2 ? sliceOf(t - 2) : VecX();
        VecX d_cur, d_prev, d_prev2;
        const double tc = eTc(xb.segment<57>(57 * i), prev, prev2,
                              g ? &d_cur : nullptr, g ? &d_prev : nullptr,
                              g ? &d_prev2 : nullptr);
        tc_total += tc;
        if (g) {
          g->segment<57>(57 * i) += config.weights.eta * d_cur;
          if (t - 1 >= start) g->segment<57>(57 * (i - 1)) += config.weights.eta * d_prev;
          if (t >= 2 && t - 2 >= start)
            g->segment<57>(57 * (i - 2)) += config.weights.eta * d_prev2;
        }
      }
      sum.tc = tc_total;
      sum.total += config.weights.eta * tc_total;
      if (log) log->iterations.push_back(sum);
      return sum.total;
    };

    AdamConfig ac;
    ac.iterations = config.iterations;
    ac.learning_rate = config.learning_rate;
    ac.lr_decay = config.lr_decay;
    const AdamResult res = adamMinimize(objective, x, ac);
    for (int t = start; t < end; ++t) {
      unpackFrameParams(res.params.segment<57>(57 * (t - start)), &hand[t], &object[t]);
    }

    if (end == n) break;
    start = end - kBatchOverlap;
  }
}

double sequenceEnergy(const SceneModels& models, const SequenceData& seq,
                      const std::vector<HandPose>& hand,
                      const std::vector<ObjectPose>& object,
                      const ShapeParams& shape, const EnergyWeights& weights) {
  const int n = seq.frameCount();
  double total = 0;
  std::vector<double> frame_totals(n);
  parallelFor(n, [&](int t) {
    const FrameEnergy fe(models, seq.rig, seq.frames[t], weights);
    frame_totals[t] = fe.eval(FrameEnergy::Mode::World,
                              packFrameParams(hand[t], object[t]), shape,
                              nullptr, nullptr);
  });
  for (int t = 0; t < n; ++t) {
    total += frame_totals[t];
    if (t >= 1) {
      const VecX prev2 =
          t >= 2 ? packFrameParams(hand[t - 2], object[t - 2]) : VecX();
      total += weights.eta * eTc(packFrameParams(hand[t], object[t]),
                                 packFrameParams(hand[t - 1], object[t - 1]),
                                 prev2);
    }
  }
  return total;
}

SinglecamInit initSinglecam(const SequenceData& seq, const HandModel& model,
                            const EnergyWeights& weights, int omega_size,
                            uint64_t seed) {
  const int n = seq.frameCount();
  if (n < 1) throw InvalidInput("initSinglecam: empty sequence");
  Rng rng(seed);
  SinglecamInit out;
  out.omega = rng.sampleWithoutReplacement(n, std::min(omega_size, n));
  const int m = static_cast<int>(out.omega.size());

  double conf_sum = 0;
  for (int idx : out.omega) conf_sum += seq.frames[idx].views[0].keypoints.col(2).sum();
  if (conf_sum <= 0)
    throw OptimFailure("initSinglecam: all keypoint confidences are zero");

  KeypointFitProblem prob;
  prob.model = &model;
  prob.frame_count = m;
  prob.nu = weights.nu;
  prob.limit_scale = static_cast<double>(m);
  for (int i = 0; i < m; ++i) {
    prob.views.push_back({&seq.frames[out.omega[i]].views[0], &seq.rig.cameras[0], i});
  }

  const HandPose base = midLimitPose(model);
  TrustRegionConfig tr;
  tr.max_iterations = 150;
  VecX best_x;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const Vec3& seed_rot : rotationSeeds()) {
    VecX x(prob.paramCount());
    x.head<kNumFingerAngles>() = base.angles;
    for (int i = 0; i < m; ++i) {
      const Vec3 wrist =
          estimateWristPosition(model, seq.frames[out.omega[i]].views, seq.rig);
      x.segment<3>(kNumFingerAngles + 6 * i) = seed_rot;
      x.segment<3>(kNumFingerAngles + 6 * i + 3) =
          wrist - rodrigues(seed_rot) * model.rest_joints.row(0).transpose();
    }
    const TrustRegionResult res = trustRegionMinimize(std::cref(prob), x, tr);
    if (res.final_cost < best_cost) {
      best_cost = res.final_cost;
      best_x = res.params;
    }
  }
  for (int i = 0; i < m; ++i) out.hand.push_back(prob.framePose(best_x, i));
  return out;
}

GraspEstimate estimateGrasp(const SceneModels& models, const SequenceData& seq,
                            const std::vector<int>& omega,
                            const GraspPose& init_grasp,
                            const std::vector<ObjectPose>& init_object,
                            const StageConfig& config,
                            const ShapeParams& shape) {
  const int m = static_cast<int>(omega.size());
  if (m == 0) throw InvalidInput("estimateGrasp: empty frame subset");
  if (init_object.size() != omega.size())
    throw InvalidInput("estimateGrasp: one object init per subset frame required");

  EnergyWeights w = config.weights;
  w.eta = 0;  // no temporal term in the rigid-grasp stage

  std::vector<FrameEnergy> energies;
  energies.reserve(m);
  for (int i = 0; i < m; ++i) {
    energies.emplace_back(models, seq.rig, seq.frames[omega[i]], w);
  }

  GraspEstimate out;
  const Objective objective = [&](const VecX& x, VecX* g) {
    if (g) g->setZero(x.size());
    struct Slot {
      EnergyBreakdown bd;
      VecX grad;
    };
    std::vector<Slot> slots(m);
    parallelFor(m, [&](int i) {
      VecX params(57);
      params.head<51>() = x.head<51>();
      params.tail<6>() = x.segment<6>(51 + 6 * i);
      energies[i].eval(FrameEnergy::Mode::Grasp, params, shape,
                       g ? &slots[i].grad : nullptr, &slots[i].bd);
    });
    EnergyBreakdown sum;
    for (int i = 0; i < m; ++i) {
      sum.add(slots[i].bd);
      if (g) {
        g->head<51>() += slots[i].grad.head<51>();
        g->segment<6>(51 + 6 * i) += slots[i].grad.tail<6>();
      }
    }
    out.log.push_back(sum);
    return sum.total;
  };

  VecX x(51 + 6 * m);
  x.head<51>() = init_grasp.toVector();
  for (int i = 0; i < m; ++i) x.segment<6>(51 + 6 * i) = init_object[i].toVector();

  AdamConfig ac;
  ac.iterations = config.iterations;
  ac.learning_rate = config.learning_rate;
  ac.lr_decay = config.lr_decay;
  const AdamResult res = adamMinimize(objective, x, ac);

  out.grasp = GraspPose::fromVector(res.params.head<51>());
  for (int i = 0; i < m; ++i) {
    out.object.push_back(ObjectPose::fromVector(res.params.segment<6>(51 + 6 * i)));
  }
  return out;
}

std::vector<ObjectPose> estimateObjectPoses(const SceneModels& models,
                                            const SequenceData& seq,
                                            const GraspPose& grasp,
                                            const ObjectPose& first_init,
                                            const StageConfig& config,
                                            StageLog* log,
                                            const ShapeParams& shape) {
  const int n = seq.frameCount();
  EnergyWeights w = config.weights;
  w.epsilon = 0;  // data terms only; the hand pose is frozen
  w.zeta = 0;
  w.eta = 0;
  if (log) log->stage = "object";

  const VecX grasp_vec = grasp.toVector();
  std::vector<ObjectPose> out(n);
  ObjectPose prev = first_init;
  for (int t = 0; t < n; ++t) {
    const FrameEnergy fe(models, seq.rig, seq.frames[t], w);
    const Objective objective = [&](const VecX& x6, VecX* g) {
      VecX params(57);
      params.head<51>() = grasp_vec;
      params.tail<6>() = x6;
      VecX g57;
      EnergyBreakdown bd;
      const double total = fe.eval(FrameEnergy::Mode::Grasp, params, shape,
                                   g ? &g57 : nullptr, &bd);
      if (g) *g = g57.tail<6>();
      if (log) log->iterations.push_back(bd);
      return total;
    };
    AdamConfig ac;
    ac.iterations = config.iterations;
    ac.learning_rate = config.learning_rate;
    ac.lr_decay = config.lr_decay;
    const AdamResult res = adamMinimize(objective, prev.toVector(), ac);
    out[t] = ObjectPose::fromVector(res.params);
    prev = out[t];
  }
  return out;
}

AnnotationResult pipelineMulticam(const SequenceData& seq,
                                  const SceneModels& models,
                                  const StageConfig& config,
                                  const std::vector<ObjectPose>& object_init,
                                  const ShapeParams& shape) {
  config.validate();
  seq.validate();
  const int n = seq.frameCount();
  if (n == 0) throw InvalidInput("pipelineMulticam: empty sequence");

  SequenceData work = seq.downscaled(config.downscale);
  work.buildClouds(config.cloud_max_range, config.cloud_max_points);

  AnnotationResult result;
  result.shape = shape;
  result.frame_ok.assign(n, 1);

  const std::vector<ObjectPose> obj_init = broadcastObjectInit(object_init, n);

  // Initialization: keypoint-only hand fit; the object init passes through.
  HandPose hand0;
  ObjectPose object0 = obj_init[0];
  try {
    hand0 = initMulticam(work.frames[0].views, models.hand, work.rig, config.weights);
  } catch (const OptimFailure&) {
    result.converged = false;
    result.failure_stage = "init";
    result.hand.assign(n, HandPose{});
    result.object.assign(n, object0);
    return result;
  }
  applyInitPerturbation(hand0, object0, config);
  result.snapshots.push_back(makeSnapshot(
      "init", std::vector<HandPose>(n, hand0), std::vector<ObjectPose>(n, object0)));

  // Single-frame tracking; frame 0 starts at the stage-1 estimates.
  result.hand.resize(n);
  result.object.resize(n);
  StageLog track_log;
  track_log.stage = "track";
  std::vector<VecX> history;
  HandPose prev_hand = hand0;
  ObjectPose prev_object = object0;
  for (int t = 0; t < n; ++t) {
    const TrackResult tr = trackSingleFrame(models, work, t, prev_hand,
                                            prev_object, history, config, shape);
    result.hand[t] = tr.hand;
    result.object[t] = tr.object;
    result.frame_ok[t] = tr.ok ? 1 : 0;
    if (!tr.ok) {
      result.converged = false;
      if (result.failure_stage.empty()) result.failure_stage = "track";
    }
    for (const auto& bd : tr.log) track_log.iterations.push_back(bd);
    history.push_back(packFrameParams(tr.hand, tr.object));
    if (history.size() > 2) history.erase(history.begin());
    prev_hand = tr.hand;
    prev_object = tr.object;
  }
  result.stage_logs.push_back(std::move(track_log));
  result.snapshots.push_back(makeSnapshot("track", result.hand, result.object));

  // Multi-frame joint refinement.
  StageLog refine_log;
  refineMultiframe(models, work, result.hand, result.object, config, &refine_log, shape);
  result.stage_logs.push_back(std::move(refine_log));
  result.snapshots.push_back(makeSnapshot("refine", result.hand, result.object));
  return result;
}

AnnotationResult pipelineSinglecam(const SequenceData& seq,
                                   const SceneModels& models,
                                   const StageConfig& config,
                                   const std::vector<ObjectPose>& object_init,
                                   const ShapeParams& shape) {
  config.validate();
  seq.validate();
  const int n = seq.frameCount();
  if (n == 0) throw InvalidInput("pipelineSinglecam: empty sequence");
  if (seq.rig.count() != 1)
    throw InvalidInput("pipelineSinglecam: expected a single-camera sequence");

  SequenceData work = seq.downscaled(config.downscale);
  work.buildClouds(config.cloud_max_range, config.cloud_max_points);

  AnnotationResult result;
  result.shape = shape;
  result.frame_ok.assign(n, 1);
  const std::vector<ObjectPose> obj_init = broadcastObjectInit(object_init, n);

  // Stage 1: shared-angle keypoint fit over the subset.
  SinglecamInit init;
  try {
    init = initSinglecam(work, models.hand, config.weights, config.omega_size,
                         config.seed);
  } catch (const OptimFailure&) {
    result.converged = false;
    result.failure_stage = "init";
    result.hand.assign(n, HandPose{});
    result.object = obj_init;
    return result;
  }
  const int m = static_cast<int>(init.omega.size());

  auto nearestOmega = [&](int t) {
    int best = 0;
    for (int i = 1; i < m; ++i) {
      if (std::abs(init.omega[i] - t) < std::abs(init.omega[best] - t)) best = i;
    }
    return best;
  };
  {
    std::vector<HandPose> h(n);
    for (int t = 0; t < n; ++t) h[t] = init.hand[nearestOmega(t)];
    result.snapshots.push_back(makeSnapshot("init", h, obj_init));
  }

  // Initial grasp: average of the per-frame object-frame poses.
  GraspPose grasp0;
  {
    VecX acc = VecX::Zero(51);
    for (int i = 0; i < m; ++i) {
      acc += worldToGrasp(init.hand[i], obj_init[init.omega[i]]).toVector();
    }
    grasp0 = GraspPose::fromVector(acc / m);
  }

  // Stage 2: rigid-grasp estimation over the subset.
  std::vector<ObjectPose> omega_obj_init;
  for (int i = 0; i < m; ++i) omega_obj_init.push_back(obj_init[init.omega[i]]);
  const GraspEstimate ge =
      estimateGrasp(models, work, init.omega, grasp0, omega_obj_init, config, shape);
  {
    StageLog gl;
    gl.stage = "grasp";
    gl.iterations = ge.log;
    result.stage_logs.push_back(std::move(gl));
    std::vector<HandPose> h(n);
    std::vector<ObjectPose> o(n);
    for (int t = 0; t < n; ++t) {
      const ObjectPose& op = ge.object[nearestOmega(t)];
      o[t] = op;
      h[t] = graspToWorld(ge.grasp, op);
    }
    result.snapshots.push_back(makeSnapshot("grasp", h, o));
  }

  // Stage 3: per-frame object poses under the fixed grasp; the hand
  // parameters are untouched. Frame 0 starts from the grasp-stage result
  // when the subset covered it, otherwise from the external init.
  ObjectPose first_obj = obj_init[0];
  for (int i = 0; i < m; ++i) {
    if (init.omega[i] == 0) first_obj = ge.object[i];
  }
  StageLog obj_log;
  const std::vector<ObjectPose> objects = estimateObjectPoses(
      models, work, ge.grasp, first_obj, config, &obj_log, shape);
  result.stage_logs.push_back(std::move(obj_log));
  {
    std::vector<HandPose> h(n);
    for (int t = 0; t < n; ++t) h[t] = graspToWorld(ge.grasp, objects[t]);
    result.snapshots.push_back(makeSnapshot("object", h, objects));
  }

  // Stage 4: multi-frame refinement, allowing per-frame grasp variation.
  result.hand.resize(n);
  result.object = objects;
  for (int t = 0; t < n; ++t) result.hand[t] = graspToWorld(ge.grasp, objects[t]);
  StageLog refine_log;
  refineMultiframe(models, work, result.hand, result.object, config, &refine_log, shape);
  result.stage_logs.push_back(std::move(refine_log));
  result.snapshots.push_back(makeSnapshot("refine", result.hand, result.object));
  return result;
}

ShapeEstimate estimateShape(const SequenceData& seq, const HandModel& model,
                            const StageConfig& config) {
  config.validate();
  seq.validate();
  const int n = seq.frameCount();
  if (n < 3) throw InvalidInput("estimateShape: at least 3 frames required");
  for (const auto& frame : seq.frames) {
    for (const auto& view : frame.views) {
      for (uint8_t v : view.mask.data) {
        if (v == kLabelObject)
          throw InvalidInput("estimateShape: sequence must contain a hand only");
      }
    }
  }

  SceneModels models;
  models.hand = model;
  models.finalize();

  StageConfig cfg = config;
  cfg.weights.zeta = 0;

  SequenceData work = seq.downscaled(cfg.downscale);
  work.buildClouds(cfg.cloud_max_range, cfg.cloud_max_points);

  ShapeEstimate out;
  const ShapeParams mean_shape;

  // Step 1: per-frame pose fits at the mean shape, tracked sequentially.
  const HandPose hand0 =
      initMulticam(work.frames[0].views, model, work.rig, cfg.weights);
  std::vector<HandPose> poses(n);
  std::vector<ObjectPose> dummies(n);
  std::vector<VecX> history;
  HandPose prev = hand0;
  for (int t = 0; t < n; ++t) {
    const TrackResult tr =
        trackSingleFrame(models, work, t, prev, {}, history, cfg, mean_shape);
    poses[t] = tr.hand;
    history.push_back(packFrameParams(tr.hand, {}));
    if (history.size() > 2) history.erase(history.begin());
    prev = tr.hand;
  }
  out.step1_energy =
      sequenceEnergy(models, work, poses, dummies, mean_shape, cfg.weights);

  // Step 2: alternate between the shape vector and per-frame poses. Both
  // block updates keep the best-seen value of the full objective, so the
  // total never rises above the step-1 energy.
  ShapeParams shape = mean_shape;
  std::vector<FrameEnergy> energies;
  for (int t = 0; t < n; ++t) {
    energies.emplace_back(models, work.rig, work.frames[t], cfg.weights);
  }
  const int rounds = 2;
  for (int round = 0; round < rounds; ++round) {
    // Shape step: poses fixed; the temporal term is constant here.
    const Objective beta_objective = [&](const VecX& beta, VecX* g) {
      if (g) g->setZero(kNumShapeParams);
      std::vector<VecX> grads(n);
      std::vector<double> vals(n);
      ShapeParams s;
      s.beta = beta;
      parallelFor(n, [&](int t) {
        VecX gs;
        vals[t] = energies[t].eval(FrameEnergy::Mode::World,
                                   packFrameParams(poses[t], dummies[t]), s,
                                   nullptr, nullptr, g ? &gs : nullptr);
        if (g) grads[t] = gs;
      });
      double total = 0;
      for (int t = 0; t < n; ++t) {
        total += vals[t];
        if (g) *g += grads[t];
      }
      return total;
    };
    AdamConfig ac;
    ac.iterations = cfg.iterations;
    ac.learning_rate = 0.02;
    ac.lr_decay = cfg.lr_decay;
    const AdamResult bres = adamMinimize(beta_objective, shape.beta, ac);
    shape.beta = bres.params;

    // Pose step: block descent per frame with temporal terms on both sides.
    for (int t = 0; t < n; ++t) {
      const Objective pose_objective = [&](const VecX& x, VecX* g) {
        EnergyBreakdown bd;
        double total = energies[t].eval(FrameEnergy::Mode::World, x, shape, g, &bd);
        auto packed = [&](int tt) -> VecX {
          return tt == t ? x : packFrameParams(poses[tt], dummies[tt]);
        };
        for (int off = 0; off <= 2; ++off) {
          const int tw = t + off;
          if (tw < 1 || tw >= n) continue;
          const VecX cur = packed(tw);
          const VecX prev1 = packed(tw - 1);
          const VecX prev2 = tw >= 2 ? packed(tw - 2) : VecX();
          VecX dc, dp, dp2;
          const double tc = eTc(cur, prev1, prev2, g ? &dc : nullptr,
                                g ? &dp : nullptr, g ? &dp2 : nullptr);
          total += cfg.weights.eta * tc;
          if (g) {
            if (off == 0) *g += cfg.weights.eta * dc;
            if (off == 1) *g += cfg.weights.eta * dp;
            if (off == 2) *g += cfg.weights.eta * dp2;
          }
        }
        return total;
      };
      AdamConfig pc;
      pc.iterations = std::max(1, cfg.iterations / 2);
      pc.learning_rate = cfg.learning_rate;
      pc.lr_decay = cfg.lr_decay;
      const AdamResult pres =
          adamMinimize(pose_objective, packFrameParams(poses[t], dummies[t]), pc);
      unpackFrameParams(pres.params, &poses[t], &dummies[t]);
    }
  }

  out.shape = shape;
  out.poses = poses;
  out.step2_energy = sequenceEnergy(models, work, poses, dummies, shape, cfg.weights);
  return out;
}

}  // namespace hoa
