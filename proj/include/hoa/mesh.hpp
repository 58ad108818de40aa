#pragma once

#include "hoa/geometry.hpp"

namespace hoa {

// Rest-pose triangle mesh (also used for the object asset).
struct TriMesh {
  MatX vertices;          // V x 3
  Eigen::MatrixXi faces;  // F x 3

  int vertexCount() const { return static_cast<int>(vertices.rows()); }
  int faceCount() const { return static_cast<int>(faces.rows()); }
};

// Posed mesh with per-vertex normals.
struct PosedMesh {
  MatX vertices;          // V x 3
  Eigen::MatrixXi faces;  // F x 3
  MatX normals;           // V x 3, unit length (zero for isolated vertices)
  int degenerate_faces = 0;
  int isolated_vertices = 0;

  int vertexCount() const { return static_cast<int>(vertices.rows()); }
  int faceCount() const { return static_cast<int>(faces.rows()); }
};

// Area-weighted average of incident face normals, normalized per vertex.
// Degenerate (zero-area) faces are skipped and counted; isolated vertices
// get a zero normal and are counted.
MatX vertexNormals(const MatX& vertices, const Eigen::MatrixXi& faces,
                   int* degenerate_faces = nullptr,
                   int* isolated_vertices = nullptr);

PosedMesh posedFromMesh(const TriMesh& mesh, const RigidTransform& transform);

}  // namespace hoa
