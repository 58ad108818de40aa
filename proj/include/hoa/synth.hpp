#pragma once

#include "hoa/evaluator.hpp"
#include "hoa/stages.hpp"

#include <string>
#include <vector>

namespace hoa {

// Scripted scene generator for ground-truth sequences.
struct SynthConfig {
  int frames = 12;
  int cameras = 3;
  int width = 160, height = 120;
  double focal = 150.0;

  std::string object_type = "box";  // box | cylinder | sphere
  double object_size = 0.045;       // half extent / radius, meters

  std::string mode = "grasp";  // grasp | hand_only
  double object_rot_speed_deg = 2.0;  // rotation per frame about a fixed axis
  double object_trans_amp = 0.012;    // orbit amplitude over the sequence
  double grasp_perturb_amp = 0.0;     // per-joint sinusoid amplitude, radians

  double depth_noise = 0.0;     // sigma, meters
  double keypoint_noise = 0.0;  // sigma, pixels
  int mask_erosion = 0;         // pixels

  uint64_t seed = 0;
  ShapeParams shape;

  // Perturbation of the emitted per-frame object initialization.
  double init_object_rot_deg = 0.0;
  double init_object_trans = 0.0;

  void validate() const;
};

struct SynthResult {
  SequenceData seq;  // observations (clouds not built)
  SceneModels models;
  AnnotationResult gt;                   // ground-truth poses + shape
  std::vector<ObjectPose> object_init;   // per-frame external init
};

SynthResult generate(const SynthConfig& config);

// Evaluation metrics between a result and the ground truth.
struct FrameMetrics {
  double joint_err = 0;        // mean over 21 joints, meters
  double joint_err_root = 0;   // after aligning the wrist
  double hand_mesh_err = 0;    // mean per-vertex, meters
  double obj_mesh_err = 0;
  double procrustes_err = 0;   // hand mesh after similarity alignment
  double f5 = 0, f15 = 0;      // hand-mesh F-scores at 5 mm / 15 mm
  double obj_trans_err = 0;
  double obj_rot_err_deg = 0;
};

struct Metrics {
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
};

Metrics evaluate(const AnnotationResult& result, const AnnotationResult& gt,
                 const SceneModels& models);

// Correspondence-free F-score between two vertex sets.
double fscore(const MatX& predicted, const MatX& reference, double threshold);

}  // namespace hoa
