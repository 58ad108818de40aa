#pragma once

#include "hoa/camera.hpp"
#include "hoa/energy.hpp"
#include "hoa/hand_model.hpp"

namespace hoa {

// Single-image predictions: 21 keypoints with confidences and 20
// root-relative unit direction vectors.
struct KeypointPrediction {
  MatX keypoints;   // 21 x 3 (u, v, confidence)
  MatX directions;  // 20 x 3, unit norm
  Camera camera;

  void validate() const;
};

// Root-relative unit directions of joints 2..21 from the wrist (joint 1).
// Coincident joints produce a zero row; `degenerate` collects their
// indices so the caller can skip those terms.
MatX jointDirections(const MatX& joints21, std::vector<int>* degenerate = nullptr);

struct LifterFit {
  HandPose pose;
  ShapeParams shape;
  double loss = 0;
  bool converged = true;
};

// Fits pose + shape to the predictions: squared keypoint reprojection,
// direction alignment (weight rho), joint limits (weight sigma) and a
// shape regularizer (weight tau). Trust-region fit followed by a
// first-order polish, multi-started over four wrist rotations.
LifterFit fitHand(const KeypointPrediction& pred, const HandModel& model,
                  const EnergyWeights& weights);

// The exact fit loss at the given state (diagnostics and tests).
double lifterLoss(const KeypointPrediction& pred, const HandModel& model,
                  const EnergyWeights& weights, const HandPose& pose,
                  const ShapeParams& shape);

}  // namespace hoa
