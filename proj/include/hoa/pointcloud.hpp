#pragma once

#include "hoa/camera.hpp"
#include "hoa/geometry.hpp"
#include "hoa/image.hpp"

#include <vector>

namespace hoa {

struct FrameObservation;  // energy.hpp

// Depth-backprojected points with a hand/object label each.
struct LabeledCloud {
  MatX points;                      // N x 3
  std::vector<uint8_t> labels;      // kLabelHand or kLabelObject

  int count() const { return static_cast<int>(points.rows()); }
};

// Back-projects labeled, valid depth pixels into the camera frame.
// Depth of exactly 0 is invalid; depths beyond max_range are dropped.
LabeledCloud backproject(const FrameObservation& obs, const Camera& cam,
                         double max_range = 2.0);

// Concatenates per-camera clouds into the rig reference frame.
LabeledCloud mergeClouds(const std::vector<LabeledCloud>& clouds,
                         const CameraRig& rig);

// Uniform-grid accelerated nearest-vertex queries. Ties broken by lowest
// vertex index.
class VertexGrid {
 public:
  explicit VertexGrid(const MatX& vertices);

  int nearest(const Vec3& query) const;
  const MatX& vertices() const { return verts_; }

 private:
  MatX verts_;
  Vec3 origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::vector<int>> cells_;

  int cellIndex(int ix, int iy, int iz) const {
    return (iz * ny_ + iy) * nx_ + ix;
  }
};

// Nearest vertex index for each query point.
std::vector<int> nearestVertices(const MatX& points, const MatX& mesh_vertices);

}  // namespace hoa
