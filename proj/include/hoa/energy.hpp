#pragma once

#include "hoa/camera.hpp"
#include "hoa/geometry.hpp"
#include "hoa/image.hpp"
#include "hoa/mesh.hpp"
#include "hoa/pointcloud.hpp"
#include "hoa/render.hpp"

#include <string>
#include <vector>

namespace hoa {

// All scalar weights of the cost function plus robustifier/renderer
// constants. Defaults are the published working point.
struct EnergyWeights {
  double alpha = 20.0;    // silhouette
  double beta = 20.0;     // depth
  double gamma = 5e-5;    // 2D joints
  double delta = 50.0;    // 3D point cloud
  double epsilon = 100.0; // joint limits
  double zeta = 50.0;     // interpenetration
  double eta = 100.0;     // temporal consistency
  double nu = 50.0;       // joint limits during keypoint-only init
  double w_phy = 5.0;     // repulsion steepness
  double rho = 10.0;      // lifter direction term
  double sigma = 5.0;     // lifter joint-limit term
  double tau = 1.0;       // lifter shape regularizer
  double tukey_c = 0.02;  // meters; depth residuals saturate past this
  double sharpness = 40.0;  // soft rasterizer, 1/pixels

  void validate() const;
};

// Per-frame, per-camera observation: segmentation labels, metric depth
// (0 = invalid) and 21 keypoints (u, v, confidence).
struct FrameObservation {
  ImageU8 mask;
  ImageD depth;
  MatX keypoints;  // 21 x 3

  void validate() const;
  FrameObservation downscaled(int factor) const;
};

struct EnergyBreakdown {
  double mask = 0, dpt = 0, j2d = 0, e3d = 0;  // data terms (raw values)
  double joint = 0, phy = 0, tc = 0;           // constraint terms
  double total = 0;  // weighted sum under the weights used at evaluation

  double weightedSum(const EnergyWeights& w) const {
    return w.alpha * mask + w.beta * dpt + w.gamma * j2d + w.delta * e3d +
           w.epsilon * joint + w.zeta * phy + w.eta * tc;
  }
  void add(const EnergyBreakdown& o);
  // First term whose value is non-finite, or empty string.
  std::string firstNonFinite() const;
};

// Gradients of a scalar term with respect to mesh quantities.
struct MeshGrad {
  MatX d_verts;    // V x 3; empty when the mesh is not involved
  MatX d_normals;  // V x 3; only the repulsion term uses normals
};

// Tukey biweight: quadratic near zero, constant c^2/6 for |r| >= c.
double tukey(double r, double c);
double tukeyDerivative(double r, double c);

// Eq. 4: squared silhouette discrepancy per class, normalized by pixel
// count. Gradients are per-pixel images fed to RenderOutput::backward by
// the caller; this function returns them for composability.
double eMask(const FrameObservation& obs, const RenderOutput& render,
             ImageD* d_silh_hand = nullptr, ImageD* d_silh_obj = nullptr);

// Eq. 5: robust depth residual over the union of rendered and observed
// foreground, normalized by the active pixel count.
double eDpt(const FrameObservation& obs, const RenderOutput& render,
            double tukey_c, ImageD* d_depth = nullptr);

// Eq. 6: confidence-weighted squared reprojection error of the 21
// keypoints. Joints behind the camera are excluded and counted.
double eJ2d(const FrameObservation& obs, const Camera& cam,
            const MatX& joints21, MatX* d_joints = nullptr,
            int* behind_camera = nullptr);

// Eq. 7: squared distance from labeled cloud points to the nearest mesh
// vertex, correspondences recomputed here and held fixed for the gradient.
double e3d(const LabeledCloud& cloud, const PosedMesh& hand_mesh,
           const PosedMesh& obj_mesh, MeshGrad* grad_hand = nullptr,
           MeshGrad* grad_obj = nullptr);

// Eq. 9: exponential repulsion over a fixed subsample of hand vertices.
// Always >= the subsample size (exp(0) per vertex).
double ePhy(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
            const std::vector<int>& hand_subsample, double w_phy,
            MeshGrad* grad_hand = nullptr, MeshGrad* grad_obj = nullptr);

// Max over the subsample of the penetration depth (diagnostics, criterion
// checks).
double maxPenetration(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                      const std::vector<int>& hand_subsample);

// Temporal consistency on raw parameter vectors. Pass empty vectors for
// missing history (t = 0 has none, t = 1 only the zeroth-order part).
// Gradients are with respect to the three stacked [hand; object] vectors.
double eTc(const VecX& cur, const VecX& prev, const VecX& prev2,
           VecX* d_cur = nullptr, VecX* d_prev = nullptr,
           VecX* d_prev2 = nullptr);

}  // namespace hoa
