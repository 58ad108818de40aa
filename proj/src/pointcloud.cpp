#include "hoa/pointcloud.hpp"

#include "hoa/energy.hpp"
#include "hoa/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hoa {

LabeledCloud backproject(const FrameObservation& obs, const Camera& cam,
                         double max_range) {
  std::vector<Vec3> pts;
  std::vector<uint8_t> labels;
  for (int y = 0; y < obs.depth.height; ++y) {
    for (int x = 0; x < obs.depth.width; ++x) {
      const uint8_t label = obs.mask.at(x, y);
      if (label == kLabelBackground) continue;
      const double d = obs.depth.at(x, y);
      if (d <= 0.0 || d > max_range || !std::isfinite(d)) continue;
      // Pixel centers sit at half-integer coordinates.
      const double u = x + 0.5, v = y + 0.5;
      pts.emplace_back((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
      labels.push_back(label);
    }
  }
  LabeledCloud cloud;
  cloud.points.resize(static_cast<int>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) cloud.points.row(static_cast<int>(i)) = pts[i].transpose();
  cloud.labels = std::move(labels);
  return cloud;
}

LabeledCloud mergeClouds(const std::vector<LabeledCloud>& clouds,
                         const CameraRig& rig) {
  if (clouds.size() != rig.cameras.size())
    throw InvalidInput("mergeClouds: cloud count does not match rig");
  int total = 0;
  for (const auto& c : clouds) total += c.count();
  LabeledCloud merged;
  merged.points.resize(total, 3);
  merged.labels.reserve(total);
  int row = 0;
  for (size_t c = 0; c < clouds.size(); ++c) {
    // Camera frame -> reference frame.
    const RigidTransform to_ref = rig.cameras[c].extrinsic.inverse();
    for (int i = 0; i < clouds[c].count(); ++i) {
      merged.points.row(row++) =
          to_ref.apply(clouds[c].points.row(i)).transpose();
      merged.labels.push_back(clouds[c].labels[i]);
    }
  }
  return merged;
}

VertexGrid::VertexGrid(const MatX& vertices) : verts_(vertices) {
  if (verts_.rows() == 0) throw InvalidInput("VertexGrid: empty mesh");
  Vec3 lo = verts_.colwise().minCoeff().transpose();
  Vec3 hi = verts_.colwise().maxCoeff().transpose();
  const double diag = (hi - lo).norm();
  cell_ = std::max(diag / 24.0, 1e-6);
  origin_ = lo;
  nx_ = std::max(1, static_cast<int>(std::floor((hi.x() - lo.x()) / cell_)) + 1);
  ny_ = std::max(1, static_cast<int>(std::floor((hi.y() - lo.y()) / cell_)) + 1);
  nz_ = std::max(1, static_cast<int>(std::floor((hi.z() - lo.z()) / cell_)) + 1);
  cells_.resize(static_cast<size_t>(nx_) * ny_ * nz_);
  for (int i = 0; i < verts_.rows(); ++i) {
    const Vec3 p = verts_.row(i).transpose();
    const int ix = std::clamp(static_cast<int>((p.x() - origin_.x()) / cell_), 0, nx_ - 1);
    const int iy = std::clamp(static_cast<int>((p.y() - origin_.y()) / cell_), 0, ny_ - 1);
    const int iz = std::clamp(static_cast<int>((p.z() - origin_.z()) / cell_), 0, nz_ - 1);
    cells_[cellIndex(ix, iy, iz)].push_back(i);
  }
}

int VertexGrid::nearest(const Vec3& query) const {
  const int qx = std::clamp(static_cast<int>(std::floor((query.x() - origin_.x()) / cell_)), 0, nx_ - 1);
  const int qy = std::clamp(static_cast<int>(std::floor((query.y() - origin_.y()) / cell_)), 0, ny_ - 1);
  const int qz = std::clamp(static_cast<int>(std::floor((query.z() - origin_.z()) / cell_)), 0, nz_ - 1);

  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  const int max_ring = std::max({nx_, ny_, nz_});

  for (int ring = 0; ring <= max_ring; ++ring) {
    // Once a candidate is found, stop when the ring's nearest possible
    // distance exceeds it. <= keeps equal-distance lower-index candidates
    // in neighboring cells reachable.
    if (best >= 0) {
      const double ring_min = (ring - 1) * cell_;
      if (ring_min > 0 && ring_min * ring_min > best_d2) break;
    }
    bool any_cell = false;
    for (int iz = qz - ring; iz <= qz + ring; ++iz) {
      if (iz < 0 || iz >= nz_) continue;
      for (int iy = qy - ring; iy <= qy + ring; ++iy) {
        if (iy < 0 || iy >= ny_) continue;
        for (int ix = qx - ring; ix <= qx + ring; ++ix) {
          if (ix < 0 || ix >= nx_) continue;
          // Shell only: skip interior cells already visited.
          if (std::max({std::abs(ix - qx), std::abs(iy - qy), std::abs(iz - qz)}) != ring)
            continue;
          any_cell = true;
          for (int idx : cells_[cellIndex(ix, iy, iz)]) {
            const double d2 = (verts_.row(idx).transpose() - query).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    if (!any_cell && ring > 0 && best >= 0) {
      // Out of the grid on all sides; nothing further can improve.
      const double ring_min = (ring - 1) * cell_;
      if (ring_min * ring_min > best_d2) break;
    }
  }
  return best;
}

std::vector<int> nearestVertices(const MatX& points, const MatX& mesh_vertices) {
  VertexGrid grid(mesh_vertices);
  std::vector<int> out(points.rows());
  for (int i = 0; i < points.rows(); ++i) {
    out[i] = grid.nearest(points.row(i).transpose());
  }
  return out;
}

}  // namespace hoa
