#include "hoa/mesh.hpp"

namespace hoa {

MatX vertexNormals(const MatX& vertices, const Eigen::MatrixXi& faces,
                   int* degenerate_faces, int* isolated_vertices) {
  MatX normals = MatX::Zero(vertices.rows(), 3);
  int degenerate = 0;
  for (int f = 0; f < faces.rows(); ++f) {
    const Vec3 a = vertices.row(faces(f, 0));
    const Vec3 b = vertices.row(faces(f, 1));
    const Vec3 c = vertices.row(faces(f, 2));
    const Vec3 n = (b - a).cross(c - a);  // 2 * area * unit normal
    if (n.squaredNorm() < 1e-24) {
      ++degenerate;
      continue;
    }
    for (int k = 0; k < 3; ++k) normals.row(faces(f, k)) += n.transpose();
  }
  int isolated = 0;
  for (int v = 0; v < normals.rows(); ++v) {
    const double len = normals.row(v).norm();
    if (len < 1e-20) {
      ++isolated;
      normals.row(v).setZero();
    } else {
      normals.row(v) /= len;
    }
  }
  if (degenerate_faces) *degenerate_faces = degenerate;
  if (isolated_vertices) *isolated_vertices = isolated;
  return normals;
}

PosedMesh posedFromMesh(const TriMesh& mesh, const RigidTransform& transform) {
  PosedMesh out;
  out.faces = mesh.faces;
  out.vertices.resize(mesh.vertices.rows(), 3);
  for (int v = 0; v < mesh.vertices.rows(); ++v) {
    out.vertices.row(v) = transform.apply(mesh.vertices.row(v)).transpose();
  }
  out.normals = vertexNormals(out.vertices, out.faces, &out.degenerate_faces,
                              &out.isolated_vertices);
  return out;
}

}  // namespace hoa
