#include "hoa/render.hpp"

#include "hoa/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hoa {
namespace {

// Sigmoid arguments beyond this band are treated as saturated: they still
// occlude and cover, but carry no gradient.
constexpr double kGradBand = 30.0;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

// Point-segment squared distance with the clamped parameter.
double segmentDist2(const Vec2& q, const Vec2& a, const Vec2& b, double* t_out) {
  const Vec2 e = b - a;
  const double len2 = e.squaredNorm();
  double t = len2 > 0 ? std::clamp((q - a).dot(e) / len2, 0.0, 1.0) : 0.0;
  *t_out = t;
  return (q - (a + t * e)).squaredNorm();
}

struct TriDistance {
  double signed_dist = 0;
  // Gradient of the signed distance w.r.t. the three 2D vertices.
  Vec2 grad[3];
};

// Signed 2D distance from q to the triangle (positive inside), with
// gradients w.r.t. the vertices. Orientation independent.
TriDistance signedTriangleDistance(const Vec2& q, const Vec2 v[3]) {
  TriDistance out;
  const double area2 = cross2(v[1] - v[0], v[2] - v[0]);
  bool inside = false;
  if (area2 != 0.0) {
    const double orient = area2 > 0 ? 1.0 : -1.0;
    inside = cross2(v[1] - v[0], q - v[0]) * orient >= 0 &&
             cross2(v[2] - v[1], q - v[1]) * orient >= 0 &&
             cross2(v[0] - v[2], q - v[2]) * orient >= 0;
  }

  int best_edge = 0;
  double best_t = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int e = 0; e < 3; ++e) {
    double t;
    const double d2 = segmentDist2(q, v[e], v[(e + 1) % 3], &t);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_edge = e;
      best_t = t;
    }
  }
  const double dist = std::sqrt(std::max(best_d2, 0.0));
  const double sign = inside ? 1.0 : -1.0;
  out.signed_dist = sign * dist;
  out.grad[0].setZero();
  out.grad[1].setZero();
  out.grad[2].setZero();
  if (dist < 1e-12) return out;  // on the boundary: subgradient 0

  const int ia = best_edge, ib = (best_edge + 1) % 3;
  const Vec2& a = v[ia];
  const Vec2& b = v[ib];
  if (best_t <= 0.0) {
    out.grad[ia] = sign * -(q - a) / dist;
  } else if (best_t >= 1.0) {
    out.grad[ib] = sign * -(q - b) / dist;
  } else {
    // Closest point interior to the edge: distance to the line through a,b.
    const Vec2 e = b - a;
    const double len = e.norm();
    const double f = cross2(e, q - a);  // dist = |f| / len
    const double sf = f >= 0 ? 1.0 : -1.0;
    const Vec2 df_da(b.y() - q.y(), q.x() - b.x());
    const Vec2 df_db(q.y() - a.y(), a.x() - q.x());
    const Vec2 dlen_da = -e / len;
    const Vec2 dlen_db = e / len;
    out.grad[ia] = sign * (sf * df_da * len - std::abs(f) * dlen_da) / (len * len);
    out.grad[ib] = sign * (sf * df_db * len - std::abs(f) * dlen_db) / (len * len);
  }
  return out;
}

// Moller-Trumbore with the ray origin at the camera center (0,0,0).
// Returns depth t (= camera z of the hit) or a negative value on miss.
double rayTriangle(const Vec3& dir, const Vec3& p0, const Vec3& p1,
                   const Vec3& p2) {
  const Vec3 e1 = p1 - p0;
  const Vec3 e2 = p2 - p0;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv_det = 1.0 / det;
  const Vec3 s = -p0;
  const double bu = s.dot(pvec) * inv_det;
  if (bu < 0.0 || bu > 1.0) return -1.0;
  const Vec3 qvec = s.cross(e1);
  const double bv = dir.dot(qvec) * inv_det;
  if (bv < 0.0 || bu + bv > 1.0) return -1.0;
  return e2.dot(qvec) * inv_det;
}

// Ray-plane depth used only for compositing order, clamped to the face's
// own depth range so grazing planes cannot extrapolate across unrelated
// geometry. Continuous in the vertices.
double planeOrderDepth(const Vec3& dir, const Vec3& p0, const Vec3& p1,
                       const Vec3& p2) {
  const double z_min = std::min({p0.z(), p1.z(), p2.z()});
  const double z_max = std::max({p0.z(), p1.z(), p2.z()});
  const Vec3 n = (p1 - p0).cross(p2 - p0);
  const double denom = n.dot(dir);
  if (std::abs(denom) > 1e-9 * n.norm()) {
    const double t = n.dot(p0) / denom;
    if (t > 0) return std::clamp(t, z_min, z_max);
  }
  return (p0.z() + p1.z() + p2.z()) / 3.0;
}

struct FaceBBox {
  int x0, x1, y0, y1;
  bool empty;
};

FaceBBox faceBBox(const Vec2 pv[3], double pad, int width, int height) {
  FaceBBox box{};
  const double lo_x = std::min({pv[0].x(), pv[1].x(), pv[2].x()}) - pad;
  const double hi_x = std::max({pv[0].x(), pv[1].x(), pv[2].x()}) + pad;
  const double lo_y = std::min({pv[0].y(), pv[1].y(), pv[2].y()}) - pad;
  const double hi_y = std::max({pv[0].y(), pv[1].y(), pv[2].y()}) + pad;
  box.x0 = std::max(0, static_cast<int>(std::floor(lo_x - 0.5)));
  box.x1 = std::min(width - 1, static_cast<int>(std::ceil(hi_x - 0.5)));
  box.y0 = std::max(0, static_cast<int>(std::floor(lo_y - 0.5)));
  box.y1 = std::min(height - 1, static_cast<int>(std::ceil(hi_y - 0.5)));
  box.empty = box.x0 > box.x1 || box.y0 > box.y1;
  return box;
}

}  // namespace

RenderOutput render(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                    const Camera& cam, double sharpness) {
  if (sharpness <= 0) throw InvalidInput("render: sharpness must be positive");
  const PosedMesh* meshes[2] = {&hand_mesh, &obj_mesh};
  for (const PosedMesh* m : meshes) {
    if (m->vertexCount() > 0 && !m->vertices.allFinite())
      throw InvalidInput("render: mesh has non-finite vertices");
  }

  RenderOutput out;
  const int w = cam.width, h = cam.height;
  out.silh_hand = ImageD(w, h, 0.0);
  out.silh_obj = ImageD(w, h, 0.0);
  out.depth = ImageD(w, h, kEmptyDepth);
  out.sharpness_ = sharpness;
  out.cam_ = cam;
  out.win_face_ = Image<int32_t>(w, h, -1);
  out.win_mesh_ = ImageU8(w, h, 0);

  for (int m = 0; m < 2; ++m) {
    auto& cache = out.meshes_[m];
    const int vc = meshes[m]->vertexCount();
    cache.cam_verts.resize(vc, 3);
    cache.proj.resize(vc, 2);
    cache.valid.assign(vc, 0);
    cache.faces = meshes[m]->faces;
    for (int v = 0; v < vc; ++v) {
      const Vec3 p = cam.extrinsic.apply(meshes[m]->vertices.row(v));
      cache.cam_verts.row(v) = p.transpose();
      if (p.z() > kMinCameraDepth) {
        cache.valid[v] = 1;
        cache.proj(v, 0) = cam.fx * p.x() / p.z() + cam.cx;
        cache.proj(v, 1) = cam.fy * p.y() / p.z() + cam.cy;
      }
    }
  }

  const double band = kGradBand / sharpness + 1.0;  // pixels

  for (int m = 0; m < 2; ++m) {
    const auto& cache = out.meshes_[m];
    for (int f = 0; f < cache.faces.rows(); ++f) {
      const int i0 = cache.faces(f, 0), i1 = cache.faces(f, 1), i2 = cache.faces(f, 2);
      if (!cache.valid[i0] || !cache.valid[i1] || !cache.valid[i2]) continue;
      const Vec2 pv[3] = {cache.proj.row(i0).transpose(),
                          cache.proj.row(i1).transpose(),
                          cache.proj.row(i2).transpose()};
      const Vec3 c0 = cache.cam_verts.row(i0).transpose();
      const Vec3 c1 = cache.cam_verts.row(i1).transpose();
      const Vec3 c2 = cache.cam_verts.row(i2).transpose();

      const FaceBBox box = faceBBox(pv, band, w, h);
      if (box.empty) continue;
      for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
          const Vec2 q(x + 0.5, y + 0.5);
          const TriDistance td = signedTriangleDistance(q, pv);
          const double arg = sharpness * td.signed_dist;
          if (arg < -kGradBand) continue;  // negligible coverage
          const Vec3 dir = pixelRay(q.x(), q.y(), cam);
          out.contributions_.push_back(
              {y * w + x, f, static_cast<uint8_t>(m),
               static_cast<uint8_t>(arg < kGradBand ? 1 : 0),
               planeOrderDepth(dir, c0, c1, c2), sigmoid(arg)});
          if (td.signed_dist >= 0.0) {
            const double t = rayTriangle(dir, c0, c1, c2);
            if (t > kMinCameraDepth && t < out.depth.at(x, y)) {
              out.depth.at(x, y) = t;
              out.win_face_.at(x, y) = f;
              out.win_mesh_.at(x, y) = static_cast<uint8_t>(m);
            }
          }
        }
      }
    }
  }

  std::sort(out.contributions_.begin(), out.contributions_.end(),
            [](const RenderOutput::Contribution& a,
               const RenderOutput::Contribution& b) {
              if (a.pixel != b.pixel) return a.pixel < b.pixel;
              if (a.order_z != b.order_z) return a.order_z < b.order_z;
              if (a.mesh != b.mesh) return a.mesh < b.mesh;
              return a.face < b.face;
            });

  // Front-to-back compositing per pixel. For a single class this equals
  // 1 - prod(1 - sigma) regardless of order.
  size_t i = 0;
  while (i < out.contributions_.size()) {
    const int pixel = out.contributions_[i].pixel;
    double vis = 1.0;
    double acc[2] = {0.0, 0.0};
    size_t j = i;
    for (; j < out.contributions_.size() && out.contributions_[j].pixel == pixel; ++j) {
      const auto& c = out.contributions_[j];
      acc[c.mesh] += c.sigma * vis;
      vis *= (1.0 - c.sigma);
    }
    const int x = pixel % w, y = pixel / w;
    out.silh_hand.at(x, y) = acc[0];
    out.silh_obj.at(x, y) = acc[1];
    i = j;
  }
  return out;
}

void RenderOutput::backward(const ImageD& d_silh_hand, const ImageD& d_silh_obj,
                            const ImageD& d_depth, MatX& grad_hand_verts,
                            MatX& grad_obj_verts) const {
  const int w = cam_.width, h = cam_.height;
  MatX* grads[2] = {&grad_hand_verts, &grad_obj_verts};
  for (int m = 0; m < 2; ++m) grads[m]->setZero(meshes_[m].cam_verts.rows(), 3);
  const bool use_silh = d_silh_hand.size() > 0 || d_silh_obj.size() > 0;
  const bool use_depth = d_depth.size() > 0;

  auto chainToVertices = [&](int mesh, int face, const Vec2 grad2[3]) {
    const auto& cache = meshes_[mesh];
    for (int k = 0; k < 3; ++k) {
      const int idx = cache.faces(face, k);
      const Vec3 p = cache.cam_verts.row(idx).transpose();
      const double iz = 1.0 / p.z();
      const Vec3 gcam(cam_.fx * iz * grad2[k].x(), cam_.fy * iz * grad2[k].y(),
                      -(cam_.fx * p.x() * grad2[k].x() +
                        cam_.fy * p.y() * grad2[k].y()) *
                          iz * iz);
      grads[mesh]->row(idx) += (cam_.extrinsic.rot.transpose() * gcam).transpose();
    }
  };

  if (use_silh) {
    size_t i = 0;
    std::vector<double> vis_before;
    while (i < contributions_.size()) {
      const int pixel = contributions_[i].pixel;
      const int x = pixel % w, y = pixel / w;
      const double g_out[2] = {
          d_silh_hand.size() ? d_silh_hand.at(x, y) : 0.0,
          d_silh_obj.size() ? d_silh_obj.at(x, y) : 0.0};
      size_t j = i;
      if (g_out[0] == 0.0 && g_out[1] == 0.0) {
        while (j < contributions_.size() && contributions_[j].pixel == pixel) ++j;
        i = j;
        continue;
      }
      // Forward sweep: visibility in front of each entry.
      vis_before.clear();
      double vis = 1.0;
      for (; j < contributions_.size() && contributions_[j].pixel == pixel; ++j) {
        vis_before.push_back(vis);
        vis *= (1.0 - contributions_[j].sigma);
      }
      // Backward sweep: dL/dsigma_f = g_c(f) vis_f - suffix / (1 - sigma_f),
      // where suffix accumulates g_c(g) * contrib_g for entries behind f.
      double suffix = 0.0;
      for (size_t k = j; k-- > i;) {
        const auto& c = contributions_[k];
        const double one_minus = 1.0 - c.sigma;
        if (c.has_grad) {
          const double d_sigma = g_out[c.mesh] * vis_before[k - i] -
                                 (one_minus > 0 ? suffix / one_minus : 0.0);
          const double dd = d_sigma * sharpness_ * c.sigma * one_minus;
          if (dd != 0.0) {
            const auto& cache = meshes_[c.mesh];
            const Vec2 pv[3] = {
                cache.proj.row(cache.faces(c.face, 0)).transpose(),
                cache.proj.row(cache.faces(c.face, 1)).transpose(),
                cache.proj.row(cache.faces(c.face, 2)).transpose()};
            const Vec2 q(x + 0.5, y + 0.5);
            const TriDistance td = signedTriangleDistance(q, pv);
            const Vec2 g2[3] = {dd * td.grad[0], dd * td.grad[1], dd * td.grad[2]};
            chainToVertices(c.mesh, c.face, g2);
          }
        }
        suffix += g_out[c.mesh] * c.sigma * vis_before[k - i];
      }
      i = j;
    }
  }

  if (use_depth) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gz = d_depth.at(x, y);
        if (gz == 0.0) continue;
        const int f = win_face_.at(x, y);
        if (f < 0) continue;
        const int m = win_mesh_.at(x, y);
        const auto& cache = meshes_[m];
        const int idx[3] = {cache.faces(f, 0), cache.faces(f, 1), cache.faces(f, 2)};
        const Vec3 p0 = cache.cam_verts.row(idx[0]).transpose();
        const Vec3 p1 = cache.cam_verts.row(idx[1]).transpose();
        const Vec3 p2 = cache.cam_verts.row(idx[2]).transpose();
        const Vec3 dir = pixelRay(x + 0.5, y + 0.5, cam_);
        // t = (n . p0) / (n . dir), n = (p1-p0) x (p2-p0).
        const Vec3 e1 = p1 - p0, e2 = p2 - p0;
        const Vec3 n = e1.cross(e2);
        const double a = n.dot(p0), b = n.dot(dir);
        if (std::abs(b) < 1e-14) continue;
        const Mat3 dn_dp0 = crossMatrix(e2) - crossMatrix(e1);
        const Mat3 dn_dp1 = -crossMatrix(e2);
        const Mat3 dn_dp2 = crossMatrix(e1);
        const Mat3* dn[3] = {&dn_dp0, &dn_dp1, &dn_dp2};
        for (int k = 0; k < 3; ++k) {
          Vec3 da_dp = dn[k]->transpose() * p0;
          if (k == 0) da_dp += n;
          const Vec3 db_dp = dn[k]->transpose() * dir;
          const Vec3 dt_dp = (da_dp * b - a * db_dp) / (b * b);
          grads[m]->row(idx[k]) +=
              (gz * (cam_.extrinsic.rot.transpose() * dt_dp)).transpose();
        }
      }
    }
  }
}

HardRaster hardRasterize(const PosedMesh& hand_mesh, const PosedMesh& obj_mesh,
                         const Camera& cam) {
  const PosedMesh* meshes[2] = {&hand_mesh, &obj_mesh};
  for (const PosedMesh* m : meshes) {
    if (m->vertexCount() > 0 && !m->vertices.allFinite())
      throw InvalidInput("hardRasterize: mesh has non-finite vertices");
  }
  HardRaster out;
  out.labels = ImageU8(cam.width, cam.height, kLabelBackground);
  out.depth = ImageD(cam.width, cam.height, kEmptyDepth);

  for (int m = 0; m < 2; ++m) {
    const auto& mesh = *meshes[m];
    const int vc = mesh.vertexCount();
    MatX cam_verts(vc, 3);
    MatX proj(vc, 2);
    std::vector<char> valid(vc, 0);
    for (int v = 0; v < vc; ++v) {
      const Vec3 p = cam.extrinsic.apply(mesh.vertices.row(v));
      cam_verts.row(v) = p.transpose();
      if (p.z() > kMinCameraDepth) {
        valid[v] = 1;
        proj(v, 0) = cam.fx * p.x() / p.z() + cam.cx;
        proj(v, 1) = cam.fy * p.y() / p.z() + cam.cy;
      }
    }
    for (int f = 0; f < mesh.faceCount(); ++f) {
      const int i0 = mesh.faces(f, 0), i1 = mesh.faces(f, 1), i2 = mesh.faces(f, 2);
      if (!valid[i0] || !valid[i1] || !valid[i2]) continue;
      const Vec2 pv[3] = {proj.row(i0).transpose(), proj.row(i1).transpose(),
                          proj.row(i2).transpose()};
      const FaceBBox box = faceBBox(pv, 0.0, cam.width, cam.height);
      if (box.empty) continue;
      const Vec3 c0 = cam_verts.row(i0).transpose();
      const Vec3 c1 = cam_verts.row(i1).transpose();
      const Vec3 c2 = cam_verts.row(i2).transpose();
      for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
          const double t =
              rayTriangle(pixelRay(x + 0.5, y + 0.5, cam), c0, c1, c2);
          if (t > kMinCameraDepth && t < out.depth.at(x, y)) {
            out.depth.at(x, y) = t;
            out.labels.at(x, y) = (m == 0) ? kLabelHand : kLabelObject;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace hoa
