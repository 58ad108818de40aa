#include "hoa/shapes.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace hoa {

TriMesh makeBox(const Vec3& h) {
  TriMesh m;
  m.vertices.resize(8, 3);
  int idx = 0;
  for (int dz : {-1, 1})
    for (int dy : {-1, 1})
      for (int dx : {-1, 1})
        m.vertices.row(idx++) = Vec3(dx * h.x(), dy * h.y(), dz * h.z()).transpose();
  m.faces.resize(12, 3);
  m.faces << 0, 3, 1, 0, 2, 3,  // bottom  (-z)
      4, 5, 7, 4, 7, 6,         // top     (+z)
      0, 1, 5, 0, 5, 4,         // -y
      2, 7, 3, 2, 6, 7,         // +y
      1, 3, 7, 1, 7, 5,         // +x
      0, 4, 6, 0, 6, 2;         // -x
  return m;
}

TriMesh makeBoxGrid(const Vec3& h, int n) {
  // Six face grids; vertices deduplicated along shared edges.
  std::map<std::tuple<long, long, long>, int> lookup;
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  auto vertexAt = [&](const Vec3& p) {
    const auto key = std::make_tuple(std::lround(p.x() * 1e7),
                                     std::lround(p.y() * 1e7),
                                     std::lround(p.z() * 1e7));
    auto it = lookup.find(key);
    if (it != lookup.end()) return it->second;
    verts.push_back(p);
    const int id = static_cast<int>(verts.size()) - 1;
    lookup.emplace(key, id);
    return id;
  };
  // axis: face normal direction; sign: +1/-1.
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {-1, 1}) {
      const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          auto corner = [&](int di, int dj) {
            Vec3 p;
            p[axis] = sign * h[axis];
            p[ua] = (-1.0 + 2.0 * (i + di) / n) * h[ua];
            p[va] = (-1.0 + 2.0 * (j + dj) / n) * h[va];
            return p;
          };
          const int a = vertexAt(corner(0, 0));
          const int b = vertexAt(corner(1, 0));
          const int c = vertexAt(corner(1, 1));
          const int d = vertexAt(corner(0, 1));
          if (sign > 0) {
            faces.push_back({a, b, c});
            faces.push_back({a, c, d});
          } else {
            faces.push_back({a, c, b});
            faces.push_back({a, d, c});
          }
        }
      }
    }
  }
  TriMesh m;
  m.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<int>(i)) = verts[i].transpose();
  m.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) m.faces.row(static_cast<int>(i)) = faces[i].transpose();
  return m;
}

TriMesh makeCylinder(double radius, double height, int segments) {
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  const double hz = height / 2;
  for (int ring = 0; ring < 2; ++ring) {
    const double z = ring == 0 ? -hz : hz;
    for (int s = 0; s < segments; ++s) {
      const double a = 2 * M_PI * s / segments;
      verts.push_back({radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  const int bottom_center = static_cast<int>(verts.size());
  verts.push_back({0, 0, -hz});
  const int top_center = static_cast<int>(verts.size());
  verts.push_back({0, 0, hz});
  for (int s = 0; s < segments; ++s) {
    const int s1 = (s + 1) % segments;
    // Side quads, outward.
    faces.push_back({s, s1, segments + s1});
    faces.push_back({s, segments + s1, segments + s});
    // Caps.
    faces.push_back({bottom_center, s1, s});
    faces.push_back({top_center, segments + s, segments + s1});
  }
  TriMesh m;
  m.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<int>(i)) = verts[i].transpose();
  m.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) m.faces.row(static_cast<int>(i)) = faces[i].transpose();
  return m;
}

TriMesh makeIcosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back(0.5 * (verts[a] + verts[b]));
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = next;
  }
  TriMesh m;
  m.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) {
    m.vertices.row(static_cast<int>(i)) = (radius * verts[i].normalized()).transpose();
  }
  m.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) m.faces.row(static_cast<int>(i)) = faces[i].transpose();
  return m;
}

}  // namespace hoa
