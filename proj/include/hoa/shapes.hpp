#pragma once

#include "hoa/mesh.hpp"

namespace hoa {

// Procedural object assets, consistently wound with outward normals.
TriMesh makeBox(const Vec3& half_extents);
TriMesh makeCylinder(double radius, double height, int segments = 24);
TriMesh makeIcosphere(double radius, int subdivisions = 2);

// Box subdivided into a grid per face, for denser vertex coverage.
TriMesh makeBoxGrid(const Vec3& half_extents, int divisions);

}  // namespace hoa
