#pragma once

#include <array>
#include <vector>

#include "smallscat/linalg.hpp"

namespace smallscat {

// Closed triangulated surface with flat panels.
//
// Triangles are CCW when seen from outside, so the winding normal points out
// of the enclosed volume.  Per-panel normal, area and centroid are cached by
// finalize(); all higher modules treat panels as flat and collocate at the
// centroid.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  // Cached per-panel data, filled by finalize().
  std::vector<Vec3> normal;
  std::vector<double> area;
  std::vector<Vec3> centroid;
  std::vector<double> diameter;  // longest edge of the panel

  double characteristic_a = 0.0;  // half the largest vertex-to-vertex distance

  int panel_count() const { return static_cast<int>(triangles.size()); }
  int vertex_count() const { return static_cast<int>(vertices.size()); }

  const Vec3& v0(int t) const { return vertices[triangles[t][0]]; }
  const Vec3& v1(int t) const { return vertices[triangles[t][1]]; }
  const Vec3& v2(int t) const { return vertices[triangles[t][2]]; }

  // Recomputes cached panel data and the characteristic radius.
  void finalize();

  // Checks that every edge is shared by exactly two triangles with opposite
  // orientation and that the signed volume is positive.  Throws TopologyError.
  void validate() const;

  SurfaceMesh translated(const Vec3& offset) const;
  SurfaceMesh scaled(const Vec3& factors) const;
  SurfaceMesh rotated(const Mat3& rot) const;

  bool shares_vertex(int t_a, int t_b) const;
};

struct MeshMeasures {
  double area = 0.0;
  double volume = 0.0;
  Vec3 centroid = Vec3::Zero();
};

// Area, enclosed volume and volume centroid via the divergence theorem; exact
// for the polyhedron itself.
MeshMeasures mesh_measures(const SurfaceMesh& mesh);

// Canonical shapes, centered at the origin.  refinement >= 0 subdivides each
// triangle into 4 per level; sphere/ellipsoid start from an icosahedron (20
// panels), the box from 12 panels (2 per face).
SurfaceMesh make_sphere(double radius, int refinement);
SurfaceMesh make_ellipsoid(double ax, double ay, double az, int refinement);
SurfaceMesh make_box(double ex, double ey, double ez, int refinement);

}  // namespace smallscat
