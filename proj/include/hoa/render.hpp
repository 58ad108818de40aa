#pragma once

#include "hoa/camera.hpp"
#include "hoa/image.hpp"
#include "hoa/mesh.hpp"

#include <vector>

namespace hoa {

// Soft silhouettes (per class, occlusion aware) plus a hard z-buffer depth
// image, with enough retained state to push per-pixel loss gradients back
// to the 3D vertices of both meshes.
class RenderOutput {
 public:
  ImageD silh_hand, silh_obj;
  ImageD depth;  // meters, kEmptyDepth where no surface

  // Maps upstream per-pixel gradients to per-vertex world-space gradients.
  // Any of the gradient images may be empty (skipped). Outputs are resized
  // and zeroed to V x 3.
  void backward(const ImageD& d_silh_hand, const ImageD& d_silh_obj,
                const ImageD& d_depth, MatX& grad_hand_verts,
                MatX& grad_obj_verts) const;

 private:
  friend RenderOutput render(const PosedMesh&, const PosedMesh&,
                             const Camera&, double);

  struct Contribution {
    int32_t pixel;
    int32_t face;      // index into the owning mesh's face list
    uint8_t mesh;      // 0 hand, 1 object
    uint8_t has_grad;  // inside the unsaturated sigmoid band
    double order_z;    // plane-extrapolated depth used for compositing order
    double sigma;
  };

  struct MeshCache {
    MatX cam_verts;          // V x 3, camera space
    MatX proj;               // V x 2, pixel coordinates
    std::vector<char> valid; // per-vertex in-front flag
    Eigen::MatrixXi faces;
  };

  double sharpness_ = 0;
  Camera cam_;
  MeshCache meshes_[2];
  // Sorted by (pixel, order_z, mesh, face); one slice per pixel.
  std::vector<Contribution> contributions_;
  Image<int32_t> win_face_;  // combined z-buffer winner, -1 none
  ImageU8 win_mesh_;
};

// Soft rasterization of the two meshes. Either mesh may be empty
// (0 vertices). Per-class coverage follows
//   1 - prod_faces(1 - sigmoid(sharpness * signed_distance)),
// composited front to back so an occluded class only receives the coverage
// the nearer class leaves over. Depth is the exact ray-cast z-buffer value
// with gradients routed through the winning face.
RenderOutput render(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                    const Camera& cam, double sharpness);

struct HardRaster {
  ImageU8 labels;  // MaskLabel values
  ImageD depth;    // meters, kEmptyDepth where background
};

// Plain z-buffer reference: per-pixel ray cast against all triangles.
HardRaster hardRasterize(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                         const Camera& cam);

}  // namespace hoa
