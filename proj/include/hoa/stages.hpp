#pragma once

#include "hoa/evaluator.hpp"
#include "hoa/optim.hpp"

#include <string>
#include <vector>

namespace hoa {

struct StageConfig {
  int batch_size = 20;          // frames per refinement batch
  int iterations = 100;         // per-stage optimizer iterations
  double learning_rate = 0.01;
  double lr_decay = 1.0;        // per-iteration geometric decay
  EnergyWeights weights;
  int omega_size = 20;          // single-camera init subset size
  uint64_t seed = 0;
  int downscale = 1;            // observation downscale during optimization
  double cloud_max_range = 2.0;
  int cloud_max_points = 4096;
  // Perturbation applied to the automatic initialization (evaluation knob;
  // all zero by default).
  double init_perturb_rot_deg = 0;
  double init_perturb_trans = 0;
  double init_perturb_joint = 0;

  void validate() const;
};

struct StageLog {
  std::string stage;
  std::vector<EnergyBreakdown> iterations;
};

// Poses of every frame after one named stage, for stage-wise evaluation.
struct StageSnapshot {
  std::string stage;
  std::vector<HandPose> hand;
  std::vector<ObjectPose> object;
};

struct AnnotationResult {
  std::vector<HandPose> hand;      // one per frame
  std::vector<ObjectPose> object;  // one per frame
  ShapeParams shape;
  std::vector<StageLog> stage_logs;
  std::vector<StageSnapshot> snapshots;
  std::vector<uint8_t> frame_ok;   // tracking health per frame
  bool converged = true;
  std::string failure_stage;
};

// Multi-view keypoint-only initialization of the 51 hand parameters
// (dogleg over the reprojection + joint-limit objective).
HandPose initMulticam(const std::vector<FrameObservation>& frame0_views,
                      const HandModel& model, const CameraRig& rig,
                      const EnergyWeights& weights);

// Per-frame tracking: full per-frame energy initialized at the previous
// frame's poses; `history` holds the packed [hand|object] vectors of up to
// the two preceding frames (latest last) for the temporal term.
struct TrackResult {
  HandPose hand;
  ObjectPose object;
  bool ok = true;
  std::vector<EnergyBreakdown> log;
};
TrackResult trackSingleFrame(const SceneModels& models, const SequenceData& seq,
                             int frame, const HandPose& init_hand,
                             const ObjectPose& init_object,
                             const std::vector<VecX>& history,
                             const StageConfig& config,
                             const ShapeParams& shape = {});

// Joint optimization of all frames in overlapping batches; poses are
// updated in place. Temporal terms couple batch boundaries through the two
// preceding (already refined) frames.
void refineMultiframe(const SceneModels& models, const SequenceData& seq,
                      std::vector<HandPose>& hand,
                      std::vector<ObjectPose>& object,
                      const StageConfig& config, StageLog* log,
                      const ShapeParams& shape = {});

// Full-sequence energy (Eq. 1 sum) at the given poses.
double sequenceEnergy(const SceneModels& models, const SequenceData& seq,
                      const std::vector<HandPose>& hand,
                      const std::vector<ObjectPose>& object,
                      const ShapeParams& shape, const EnergyWeights& weights);

// Shared-finger-angle initialization over a random frame subset (single
// camera): one 45-vector for all frames plus per-frame wrist transforms.
struct SinglecamInit {
  std::vector<int> omega;          // ascending frame indices
  std::vector<HandPose> hand;      // per-frame (shared angles substituted)
};
SinglecamInit initSinglecam(const SequenceData& seq, const HandModel& model,
                            const EnergyWeights& weights, int omega_size,
                            uint64_t seed);

// Rigid-grasp estimation over the subset: one grasp pose plus per-frame
// object poses, under the occlusion-aware data terms.
struct GraspEstimate {
  GraspPose grasp;
  std::vector<ObjectPose> object;  // aligned with omega
  std::vector<EnergyBreakdown> log;
};
GraspEstimate estimateGrasp(const SceneModels& models, const SequenceData& seq,
                            const std::vector<int>& omega,
                            const GraspPose& init_grasp,
                            const std::vector<ObjectPose>& init_object,
                            const StageConfig& config,
                            const ShapeParams& shape = {});

// Per-frame object pose under a fixed grasp, each frame initialized from
// its predecessor. The grasp (hand) parameters are not touched.
std::vector<ObjectPose> estimateObjectPoses(const SceneModels& models,
                                            const SequenceData& seq,
                                            const GraspPose& grasp,
                                            const ObjectPose& first_init,
                                            const StageConfig& config,
                                            StageLog* log,
                                            const ShapeParams& shape = {});

// Full pipelines. `object_init` supplies the external object pose
// initialization: either one pose (first frame) or one per frame.
AnnotationResult pipelineMulticam(const SequenceData& seq,
                                  const SceneModels& models,
                                  const StageConfig& config,
                                  const std::vector<ObjectPose>& object_init,
                                  const ShapeParams& shape = {});
AnnotationResult pipelineSinglecam(const SequenceData& seq,
                                   const SceneModels& models,
                                   const StageConfig& config,
                                   const std::vector<ObjectPose>& object_init,
                                   const ShapeParams& shape = {});

// Two-step shape calibration on a hand-only sequence: per-frame pose fits
// at the mean shape, then alternating minimization over the shape vector
// with the poses re-optimized.
struct ShapeEstimate {
  ShapeParams shape;
  std::vector<HandPose> poses;
  double step1_energy = 0;
  double step2_energy = 0;
};
ShapeEstimate estimateShape(const SequenceData& seq, const HandModel& model,
                            const StageConfig& config);

}  // namespace hoa
