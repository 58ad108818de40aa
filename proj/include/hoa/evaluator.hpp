#pragma once

#include "hoa/energy.hpp"
#include "hoa/hand_model.hpp"

#include <optional>
#include <vector>

namespace hoa {

// The hand asset plus the rigid object asset for one sequence.
struct SceneModels {
  HandModel hand;
  TriMesh object;             // rest mesh in object coordinates
  MatX object_rest_normals;   // V x 3, derived

  bool hasObject() const { return object.vertexCount() > 0; }
  void finalize();
  PosedMesh posedObject(const ObjectPose& pose) const;
};

// One frame of a sequence: per-camera observations plus the merged
// labeled cloud in the rig reference frame.
struct FrameData {
  std::vector<FrameObservation> views;
  LabeledCloud cloud;
};

struct SequenceData {
  CameraRig rig;
  std::vector<FrameData> frames;

  int frameCount() const { return static_cast<int>(frames.size()); }
  void buildClouds(double max_range = 2.0, int max_points = 4096);
  // Downscaled copy (cameras, observations) with clouds rebuilt.
  SequenceData downscaled(int factor) const;
  void validate() const;
};

// Evaluates the per-frame energy (all terms except the temporal one) and
// its gradient with respect to a 57-entry parameter block
// [hand-or-grasp 51 | object 6].
class FrameEnergy {
 public:
  enum class Mode {
    World,  // params[0:51] is the hand pose in world coordinates
    Grasp,  // params[0:51] is the hand pose in object coordinates
  };

  FrameEnergy(const SceneModels& models, const CameraRig& rig,
              const FrameData& frame, const EnergyWeights& weights);

  // Terms with a zero weight are skipped entirely. Throws OptimFailure if
  // any term goes non-finite, naming the term.
  double eval(Mode mode, const VecX& params, const ShapeParams& shape,
              VecX* grad, EnergyBreakdown* breakdown,
              VecX* grad_shape = nullptr) const;

  const EnergyWeights& weights() const { return weights_; }

 private:
  const SceneModels* models_;
  const CameraRig* rig_;
  const FrameData* frame_;
  EnergyWeights weights_;
};

// Stacks [hand51 | obj6] per frame.
VecX packFrameParams(const HandPose& hand, const ObjectPose& obj);
void unpackFrameParams(const VecX& x, HandPose* hand, ObjectPose* obj);

}  // namespace hoa
