#include "hoa/energy.hpp"

#include "hoa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace hoa {

void EnergyWeights::validate() const {
  const double vals[] = {alpha, beta,  gamma, delta, epsilon, zeta, eta,
                         nu,    w_phy, rho,   sigma, tau};
  for (double v : vals) {
    if (!(v >= 0)) throw InvalidInput("energy weights must be non-negative");
  }
  if (!(tukey_c > 0)) throw InvalidInput("tukey_c must be positive");
  if (!(sharpness > 0)) throw InvalidInput("sharpness must be positive");
}

void FrameObservation::validate() const {
  if (mask.width != depth.width || mask.height != depth.height)
    throw InvalidInput("observation mask/depth resolution mismatch");
  for (uint8_t v : mask.data) {
    if (v > kLabelObject) throw InvalidInput("observation mask label out of range");
  }
  for (double d : depth.data) {
    if (d < 0 || !std::isfinite(d)) throw InvalidInput("observation depth must be finite and >= 0");
  }
  if (keypoints.rows() != 21 || keypoints.cols() != 3)
    throw InvalidInput("observation keypoints must be 21x3");
  for (int i = 0; i < 21; ++i) {
    const double c = keypoints(i, 2);
    if (c < 0 || c > 1) throw InvalidInput("keypoint confidence out of [0,1]");
  }
}

FrameObservation FrameObservation::downscaled(int factor) const {
  if (factor <= 1) return *this;
  FrameObservation out;
  const int w = mask.width / factor, h = mask.height / factor;
  out.mask = ImageU8(w, h, 0);
  out.depth = ImageD(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Nearest sample at the small pixel's center.
      const int sx = std::min(mask.width - 1,
                              static_cast<int>((x + 0.5) * factor));
      const int sy = std::min(mask.height - 1,
                              static_cast<int>((y + 0.5) * factor));
      out.mask.at(x, y) = mask.at(sx, sy);
      out.depth.at(x, y) = depth.at(sx, sy);
    }
  }
  out.keypoints = keypoints;
  out.keypoints.col(0) /= factor;
  out.keypoints.col(1) /= factor;
  return out;
}

void EnergyBreakdown::add(const EnergyBreakdown& o) {
  mask += o.mask;
  dpt += o.dpt;
  j2d += o.j2d;
  e3d += o.e3d;
  joint += o.joint;
  phy += o.phy;
  tc += o.tc;
  total += o.total;
}

std::string EnergyBreakdown::firstNonFinite() const {
  const std::pair<const char*, double> entries[] = {
      {"mask", mask}, {"dpt", dpt},     {"j2d", j2d}, {"3d", e3d},
      {"joint", joint}, {"phy", phy},   {"tc", tc},   {"total", total}};
  for (const auto& [name, value] : entries) {
    if (!std::isfinite(value)) return name;
  }
  return {};
}

double tukey(double r, double c) {
  const double a = std::abs(r);
  if (a >= c) return c * c / 6.0;
  const double q = 1.0 - (r / c) * (r / c);
  return c * c / 6.0 * (1.0 - q * q * q);
}

double tukeyDerivative(double r, double c) {
  if (std::abs(r) >= c) return 0.0;
  const double q = 1.0 - (r / c) * (r / c);
  return r * q * q;
}

double eMask(const FrameObservation& obs, const RenderOutput& render,
             ImageD* d_silh_hand, ImageD* d_silh_obj) {
  const int w = render.silh_hand.width, h = render.silh_hand.height;
  if (!obs.mask.sameSize(w, h))
    throw InvalidInput("eMask: observation and render resolution mismatch");
  const double norm = 1.0 / (static_cast<double>(w) * h);
  if (d_silh_hand) *d_silh_hand = ImageD(w, h, 0.0);
  if (d_silh_obj) *d_silh_obj = ImageD(w, h, 0.0);
  double sum = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double mh = obs.mask.at(x, y) == kLabelHand ? 1.0 : 0.0;
      const double mo = obs.mask.at(x, y) == kLabelObject ? 1.0 : 0.0;
      const double rh = render.silh_hand.at(x, y) - mh;
      const double ro = render.silh_obj.at(x, y) - mo;
      sum += rh * rh + ro * ro;
      if (d_silh_hand) d_silh_hand->at(x, y) = 2.0 * rh * norm;
      if (d_silh_obj) d_silh_obj->at(x, y) = 2.0 * ro * norm;
    }
  }
  return sum * norm;
}

double eDpt(const FrameObservation& obs, const RenderOutput& render,
            double tukey_c, ImageD* d_depth) {
  const int w = render.depth.width, h = render.depth.height;
  if (!obs.depth.sameSize(w, h))
    throw InvalidInput("eDpt: observation and render resolution mismatch");
  if (d_depth) *d_depth = ImageD(w, h, 0.0);
  const double saturated = tukey_c * tukey_c / 6.0;
  double sum = 0;
  int active = 0;
  struct Pending {
    int x, y;
    double deriv;
  };
  std::vector<Pending> pending;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double rendered = render.depth.at(x, y);
      const bool has_render = std::isfinite(rendered);
      const double observed = obs.depth.at(x, y);
      const bool has_obs =
          observed > 0.0 && obs.mask.at(x, y) != kLabelBackground;
      if (!has_render && !has_obs) continue;
      ++active;
      if (has_render && has_obs) {
        const double r = rendered - observed;
        sum += tukey(r, tukey_c);
        if (d_depth) pending.push_back({x, y, tukeyDerivative(r, tukey_c)});
      } else {
        sum += saturated;
      }
    }
  }
  if (active == 0) return 0.0;
  const double norm = 1.0 / active;
  if (d_depth) {
    for (const Pending& p : pending) d_depth->at(p.x, p.y) = p.deriv * norm;
  }
  return sum * norm;
}

double eJ2d(const FrameObservation& obs, const Camera& cam,
            const MatX& joints21, MatX* d_joints, int* behind_camera) {
  if (joints21.rows() != 21) throw InvalidInput("eJ2d: expected 21 joints");
  if (d_joints) d_joints->setZero(21, 3);
  int behind = 0;
  double sum = 0;
  for (int i = 0; i < 21; ++i) {
    const double conf = obs.keypoints(i, 2);
    if (conf == 0.0) continue;
    const Projection p = project(joints21.row(i).transpose(), cam, d_joints != nullptr);
    if (!p.valid) {
      ++behind;
      continue;
    }
    const Vec2 r(p.u - obs.keypoints(i, 0), p.v - obs.keypoints(i, 1));
    sum += conf * r.squaredNorm();
    if (d_joints) {
      d_joints->row(i) += (2.0 * conf * (r.transpose() * p.jac));
    }
  }
  if (behind_camera) *behind_camera = behind;
  return sum;
}

double e3d(const LabeledCloud& cloud, const PosedMesh& hand_mesh,
           const PosedMesh& obj_mesh, MeshGrad* grad_hand, MeshGrad* grad_obj) {
  if (grad_hand) grad_hand->d_verts.setZero(hand_mesh.vertexCount(), 3);
  if (grad_obj) grad_obj->d_verts.setZero(obj_mesh.vertexCount(), 3);
  if (cloud.count() == 0) return 0.0;

  double sum = 0;
  int active = 0;
  const bool has_hand = hand_mesh.vertexCount() > 0;
  const bool has_obj = obj_mesh.vertexCount() > 0;
  std::unique_ptr<VertexGrid> hand_grid, obj_grid;
  if (has_hand) hand_grid = std::make_unique<VertexGrid>(hand_mesh.vertices);
  if (has_obj) obj_grid = std::make_unique<VertexGrid>(obj_mesh.vertices);

  for (int i = 0; i < cloud.count(); ++i) {
    const Vec3 p = cloud.points.row(i).transpose();
    const bool is_hand = cloud.labels[i] == kLabelHand;
    if (is_hand && !has_hand) continue;
    if (!is_hand && !has_obj) continue;
    ++active;
    const VertexGrid& grid = is_hand ? *hand_grid : *obj_grid;
    const int j = grid.nearest(p);
    const Vec3 v = grid.vertices().row(j).transpose();
    sum += (p - v).squaredNorm();
    if (is_hand && grad_hand) {
      grad_hand->d_verts.row(j) += (-2.0 * (p - v)).transpose();
    } else if (!is_hand && grad_obj) {
      grad_obj->d_verts.row(j) += (-2.0 * (p - v)).transpose();
    }
  }
  (void)active;
  return sum;
}

double ePhy(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
            const std::vector<int>& hand_subsample, double w_phy,
            MeshGrad* grad_hand, MeshGrad* grad_obj) {
  if (grad_hand) grad_hand->d_verts.setZero(hand_mesh.vertexCount(), 3);
  if (grad_obj) {
    grad_obj->d_verts.setZero(obj_mesh.vertexCount(), 3);
    grad_obj->d_normals.setZero(obj_mesh.vertexCount(), 3);
  }
  if (obj_mesh.vertexCount() == 0 || hand_subsample.empty())
    return static_cast<double>(hand_subsample.size());

  VertexGrid grid(obj_mesh.vertices);
  double sum = 0;
  for (int m : hand_subsample) {
    const Vec3 vh = hand_mesh.vertices.row(m).transpose();
    const int j = grid.nearest(vh);
    const Vec3 vo = obj_mesh.vertices.row(j).transpose();
    const Vec3 n = obj_mesh.normals.row(j).transpose();
    const double depth = -n.dot(vh - vo);
    const double gamma = std::max(depth, 0.0);
    const double e = std::exp(w_phy * gamma);
    sum += e;
    if (gamma > 0.0) {
      const double scale = e * w_phy;
      if (grad_hand) grad_hand->d_verts.row(m) += (scale * -n).transpose();
      if (grad_obj) {
        grad_obj->d_verts.row(j) += (scale * n).transpose();
        grad_obj->d_normals.row(j) += (scale * -(vh - vo)).transpose();
      }
    }
  }
  return sum;
}

double maxPenetration(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                      const std::vector<int>& hand_subsample) {
  if (obj_mesh.vertexCount() == 0 || hand_subsample.empty()) return 0.0;
  VertexGrid grid(obj_mesh.vertices);
  double worst = 0.0;
  for (int m : hand_subsample) {
    const Vec3 vh = hand_mesh.vertices.row(m).transpose();
    const int j = grid.nearest(vh);
    const Vec3 vo = obj_mesh.vertices.row(j).transpose();
    const Vec3 n = obj_mesh.normals.row(j).transpose();
    worst = std::max(worst, -n.dot(vh - vo));
  }
  return worst;
}

double eTc(const VecX& cur, const VecX& prev, const VecX& prev2, VecX* d_cur,
           VecX* d_prev, VecX* d_prev2) {
  if (d_cur) d_cur->setZero(cur.size());
  if (d_prev) d_prev->setZero(prev.size());
  if (d_prev2) d_prev2->setZero(prev2.size());
  if (prev.size() == 0) return 0.0;  // first frame: no history
  const VecX delta = cur - prev;
  double sum = delta.squaredNorm();
  if (d_cur) *d_cur += 2.0 * delta;
  if (d_prev) *d_prev -= 2.0 * delta;
  if (prev2.size() > 0) {
    const VecX delta_prev = prev - prev2;
    const VecX dd = delta - delta_prev;
    sum += dd.squaredNorm();
    if (d_cur) *d_cur += 2.0 * dd;
    if (d_prev) *d_prev -= 4.0 * dd;
    if (d_prev2) *d_prev2 += 2.0 * dd;
  }
  return sum;
}

}  // namespace hoa
