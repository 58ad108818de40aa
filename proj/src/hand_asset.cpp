#include "hoa/hand_model.hpp"

#include <cmath>
#include <vector>

namespace hoa {
namespace {

// Finger storage order follows the node layout: index, middle, pinky,
// ring, thumb. Nodes 1+3f, 2+3f, 3+3f are the MCP, PIP, DIP joints.
struct FingerSpec {
  Vec3 mcp;          // knuckle position
  Vec3 dir;          // bone direction (unit)
  double bones[3];   // proximal, middle, distal lengths
  double radius;     // tube radius at the knuckle
};

constexpr int kRingsPerBone = 4;
constexpr int kRingVerts = 10;
constexpr int kPalmRings = 8;
constexpr int kPalmRingVerts = 16;

struct Builder {
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::vector<Eigen::Matrix<double, kNumNodes, 1>> weights;

  int addVertex(const Vec3& p, const Eigen::Matrix<double, kNumNodes, 1>& w) {
    verts.push_back(p);
    weights.push_back(w);
    return static_cast<int>(verts.size()) - 1;
  }
  void addFace(int a, int b, int c) { faces.push_back({a, b, c}); }

  // Stitches two rings of equal size with outward quads split into triangles.
  void stitch(const std::vector<int>& a, const std::vector<int>& b) {
    const int n = static_cast<int>(a.size());
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      addFace(a[i], b[i], b[j]);
      addFace(a[i], b[j], a[j]);
    }
  }
  void fan(int center, const std::vector<int>& ring, bool flip) {
    const int n = static_cast<int>(ring.size());
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      if (flip) addFace(center, ring[j], ring[i]);
      else addFace(center, ring[i], ring[j]);
    }
  }
};

Eigen::Matrix<double, kNumNodes, 1> singleNode(int node) {
  Eigen::Matrix<double, kNumNodes, 1> w =
      Eigen::Matrix<double, kNumNodes, 1>::Zero();
  w[node] = 1.0;
  return w;
}

// Table of per-parameter angle limits (radians), rows grouped finger-major
// as [MCP.xyz, PIP.xyz, DIP.xyz] per finger.
const double kLimits[kNumFingerAngles][2] = {
    // index
    {0.00, 0.45}, {-0.15, 0.20}, {0.10, 1.80},
    {-0.30, 0.20}, {0.00, 0.00}, {0.00, 0.20},
    {0.00, 0.00}, {0.00, 0.00}, {0.00, 1.25},
    // middle
    {0.00, 0.00}, {-0.15, 0.15}, {0.10, 2.00},
    {-0.50, -0.20}, {0.00, 0.00}, {0.00, 2.00},
    {0.00, 0.00}, {0.00, 0.00}, {0.00, 1.25},
    // pinky
    {-1.50, -0.20}, {-0.15, 0.60}, {-0.10, 1.60},
    {0.00, 0.00}, {-0.50, 0.60}, {0.00, 2.00},
    {0.00, 0.00}, {0.00, 0.00}, {0.00, 1.25},
    // ring
    {-0.50, -0.40}, {-0.25, 0.10}, {0.10, 1.80},
    {-0.40, -0.20}, {0.00, 0.00}, {0.00, 2.00},
    {0.00, 0.00}, {0.00, 0.00}, {0.00, 1.25},
    // thumb
    {0.00, 2.00}, {-0.83, 0.66}, {0.00, 0.50},
    {-0.15, 1.60}, {0.00, 0.00}, {0.00, 0.50},
    {0.00, 0.00}, {-0.50, 0.00}, {-1.57, 1.08},
};

}  // namespace

HandModel HandModel::makeSynthetic() {
  // Canonical frame: wrist at the origin, fingers along +x, palm normal +y.
  // Positive flexion (3rd component of each joint triplet) curls toward +y.
  const double knuckle_x = 0.085;
  const double palm_back = -0.022;
  const std::array<FingerSpec, 5> fingers = {{
      {{knuckle_x, 0.0, 0.028}, Vec3(1, 0, 0), {0.042, 0.026, 0.020}, 0.0080},   // index
      {{knuckle_x, 0.0, 0.009}, Vec3(1, 0, 0), {0.047, 0.029, 0.022}, 0.0082},   // middle
      {{knuckle_x, 0.0, -0.030}, Vec3(1, 0, 0), {0.032, 0.020, 0.016}, 0.0065},  // pinky
      {{knuckle_x, 0.0, -0.011}, Vec3(1, 0, 0), {0.043, 0.027, 0.020}, 0.0078},  // ring
      {{0.030, -0.006, 0.042},
       Vec3(0.62, 0.0, 0.7846018098373213),  // unit
       {0.040, 0.032, 0.026},
       0.0100},  // thumb
  }};

  HandModel model;
  model.parents[0] = 0;
  model.rest_joints = MatX::Zero(kNumNodes, 3);
  model.rest_joints.row(0) = Vec3(0, 0, 0).transpose();

  Builder b;

  for (int f = 0; f < 5; ++f) {
    const FingerSpec& spec = fingers[f];
    const int mcp_node = 1 + 3 * f;
    model.parents[mcp_node] = 0;
    model.parents[mcp_node + 1] = mcp_node;
    model.parents[mcp_node + 2] = mcp_node + 1;
    Vec3 joint = spec.mcp;
    model.rest_joints.row(mcp_node) = joint.transpose();
    joint += spec.bones[0] * spec.dir;
    model.rest_joints.row(mcp_node + 1) = joint.transpose();
    joint += spec.bones[1] * spec.dir;
    model.rest_joints.row(mcp_node + 2) = joint.transpose();
  }

  // Frame for finger tube cross sections: u, v span the plane normal to dir.
  auto ringFrame = [](const Vec3& dir, Vec3& u, Vec3& v) {
    u = dir.cross(Vec3(0, 1, 0));
    if (u.norm() < 1e-6) u = dir.cross(Vec3(0, 0, 1));
    u.normalize();
    v = dir.cross(u);
  };

  std::array<int, 5> tip_indices{};
  for (int f = 0; f < 5; ++f) {
    const FingerSpec& spec = fingers[f];
    const int mcp_node = 1 + 3 * f;
    Vec3 u, v;
    ringFrame(spec.dir, u, v);
    const double total_len = spec.bones[0] + spec.bones[1] + spec.bones[2];
    std::vector<int> prev_ring;
    for (int bone = 0; bone < 3; ++bone) {
      const Vec3 start = model.rest_joints.row(mcp_node + bone).transpose();
      const double len = spec.bones[bone];
      for (int r = 0; r < kRingsPerBone; ++r) {
        const double t = (r + 0.5) / kRingsPerBone;
        const Vec3 center = start + t * len * spec.dir;
        const double along = (bone == 0 ? 0.0 : bone == 1 ? spec.bones[0]
                              : spec.bones[0] + spec.bones[1]) +
                             t * len;
        const double taper = 1.0 - 0.35 * along / total_len;
        const double radius = spec.radius * taper;
        // Blend weights across the two joints nearest this ring.
        Eigen::Matrix<double, kNumNodes, 1> w =
            Eigen::Matrix<double, kNumNodes, 1>::Zero();
        const int node = mcp_node + bone;
        const double blend_half = 0.30;  // fraction of a bone
        if (t < blend_half && bone > 0) {
          const double a = 0.5 + 0.5 * (t / blend_half);
          w[node] = a;
          w[node - 1] = 1.0 - a;
        } else if (t > 1.0 - blend_half && bone < 2) {
          const double a = 0.5 + 0.5 * ((1.0 - t) / blend_half);
          w[node] = a;
          w[node + 1] = 1.0 - a;
        } else {
          w[node] = 1.0;
        }
        std::vector<int> ring;
        for (int k = 0; k < kRingVerts; ++k) {
          const double ang = 2.0 * M_PI * k / kRingVerts;
          const Vec3 p = center + radius * (std::cos(ang) * u + std::sin(ang) * v);
          ring.push_back(b.addVertex(p, w));
        }
        if (!prev_ring.empty()) b.stitch(prev_ring, ring);
        else b.fan(b.addVertex(start - 0.002 * spec.dir, singleNode(node)), ring, true);
        prev_ring = ring;
      }
    }
    // Fingertip: cap vertex slightly beyond the distal bone end.
    const Vec3 tip = model.rest_joints.row(mcp_node + 2).transpose() +
                     (spec.bones[2] + 0.004) * spec.dir;
    const int tip_idx = b.addVertex(tip, singleNode(mcp_node + 2));
    b.fan(tip_idx, prev_ring, false);
    tip_indices[f] = tip_idx;
  }
  model.tips = tip_indices;

  // Palm: closed elliptical tube from behind the wrist to the knuckle line,
  // fully attached to the wrist node.
  {
    const double x0 = palm_back, x1 = knuckle_x - 0.004;
    const double half_width = 0.044, half_thick = 0.013;
    std::vector<int> prev_ring;
    int back_center = -1, front_center = -1;
    for (int r = 0; r < kPalmRings; ++r) {
      const double s = static_cast<double>(r) / (kPalmRings - 1);
      const double x = x0 + s * (x1 - x0);
      // Slight taper toward the wrist.
      const double wz = half_width * (0.62 + 0.38 * std::sin(M_PI * std::min(1.0, 0.25 + 0.75 * s)));
      const double wy = half_thick;
      std::vector<int> ring;
      for (int k = 0; k < kPalmRingVerts; ++k) {
        const double ang = 2.0 * M_PI * k / kPalmRingVerts;
        const Vec3 p(x, wy * std::sin(ang), wz * std::cos(ang));
        ring.push_back(b.addVertex(p, singleNode(0)));
      }
      if (r == 0) {
        back_center = b.addVertex(Vec3(x0 - 0.004, 0, 0), singleNode(0));
        b.fan(back_center, ring, true);
      }
      if (!prev_ring.empty()) b.stitch(prev_ring, ring);
      prev_ring = ring;
    }
    front_center = b.addVertex(Vec3(x1 + 0.004, 0, 0), singleNode(0));
    b.fan(front_center, prev_ring, false);
  }

  const int v_count = static_cast<int>(b.verts.size());
  model.template_vertices.resize(v_count, 3);
  model.skin_weights.resize(v_count, kNumNodes);
  for (int v = 0; v < v_count; ++v) {
    model.template_vertices.row(v) = b.verts[v].transpose();
    model.skin_weights.row(v) = b.weights[v].transpose();
  }
  model.faces.resize(static_cast<int>(b.faces.size()), 3);
  for (size_t f = 0; f < b.faces.size(); ++f) model.faces.row(static_cast<int>(f)) = b.faces[f].transpose();

  // Shape blendshapes: a few global modes plus low-amplitude wiggles.
  for (auto& d : model.shape_dirs) d = MatX::Zero(v_count, 3);
  for (int v = 0; v < v_count; ++v) {
    const Vec3 p = b.verts[v];
    model.shape_dirs[0].row(v) = (0.040 * p).transpose();  // overall size
    if (p.x() > knuckle_x) {
      model.shape_dirs[1](v, 0) = 0.10 * (p.x() - knuckle_x);  // finger length
    }
    model.shape_dirs[2](v, 2) = 0.060 * p.z();                   // width
    model.shape_dirs[3](v, 1) = 0.250 * p.y();                   // thickness
    if (p.x() < knuckle_x) {
      model.shape_dirs[4](v, 0) = 0.050 * (p.x() - palm_back);   // palm length
    }
    for (int m = 5; m < kNumShapeParams; ++m) {
      const double freq = 18.0 + 7.0 * m;
      const double amp = 0.0012;
      model.shape_dirs[m](v, m % 3) =
          amp * std::sin(freq * p.x() + 0.7 * m + 3.1 * p.z());
    }
  }

  model.limits_lo.resize(kNumFingerAngles);
  model.limits_hi.resize(kNumFingerAngles);
  for (int i = 0; i < kNumFingerAngles; ++i) {
    model.limits_lo[i] = kLimits[i][0];
    model.limits_hi[i] = kLimits[i][1];
  }

  model.finalize();
  return model;
}

}  // namespace hoa
