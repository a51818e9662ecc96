#include "smallscat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "smallscat/errors.hpp"

namespace smallscat {

void SurfaceMesh::finalize() {
  const int nt = panel_count();
  normal.resize(nt);
  area.resize(nt);
  centroid.resize(nt);
  diameter.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const Vec3& a = v0(t);
    const Vec3& b = v1(t);
    const Vec3& c = v2(t);
    const Vec3 cr = (b - a).cross(c - a);
    const double n2 = cr.norm();
    if (!(n2 > 0.0)) {
      std::ostringstream os;
      os << "degenerate panel " << t << " (zero area)";
      throw TopologyError(os.str());
    }
    normal[t] = cr / n2;
    area[t] = 0.5 * n2;
    centroid[t] = (a + b + c) / 3.0;
    diameter[t] = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  }

  // Largest pairwise vertex distance; O(nv^2) but meshes stay desk-sized.
  double d2max = 0.0;
  const int nv = vertex_count();
  for (int i = 0; i < nv; ++i)
    for (int j = i + 1; j < nv; ++j)
      d2max = std::max(d2max, (vertices[i] - vertices[j]).squaredNorm());
  characteristic_a = 0.5 * std::sqrt(d2max);
}

void SurfaceMesh::validate() const {
  // Each directed edge must appear exactly once and its reverse exactly once.
  std::map<std::pair<int, int>, int> directed;
  for (int t = 0; t < panel_count(); ++t) {
    for (int e = 0; e < 3; ++e) {
      const int a = triangles[t][e];
      const int b = triangles[t][(e + 1) % 3];
      if (a == b) throw TopologyError("panel with repeated vertex");
      auto [it, inserted] = directed.emplace(std::make_pair(a, b), t);
      if (!inserted) {
        std::ostringstream os;
        os << "edge (" << a << "," << b << ") used twice in the same direction; "
           << "mesh is not consistently oriented";
        throw TopologyError(os.str());
      }
    }
  }
  for (const auto& [edge, t] : directed) {
    if (directed.find({edge.second, edge.first}) == directed.end()) {
      std::ostringstream os;
      os << "boundary edge (" << edge.first << "," << edge.second << ") of panel " << t
         << "; mesh is not closed";
      throw TopologyError(os.str());
    }
  }
  double vol6 = 0.0;
  for (int t = 0; t < panel_count(); ++t)
    vol6 += v0(t).cross(v1(t)).dot(v2(t));
  if (!(vol6 > 0.0))
    throw TopologyError("winding encloses non-positive volume; normals are not outward");
}

SurfaceMesh SurfaceMesh::translated(const Vec3& offset) const {
  SurfaceMesh out = *this;
  for (auto& v : out.vertices) v += offset;
  out.finalize();
  return out;
}

SurfaceMesh SurfaceMesh::scaled(const Vec3& factors) const {
  SurfaceMesh out = *this;
  for (auto& v : out.vertices) v = v.cwiseProduct(factors);
  out.finalize();
  return out;
}

SurfaceMesh SurfaceMesh::rotated(const Mat3& rot) const {
  SurfaceMesh out = *this;
  for (auto& v : out.vertices) v = rot * v;
  out.finalize();
  return out;
}

bool SurfaceMesh::shares_vertex(int t_a, int t_b) const {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (triangles[t_a][i] == triangles[t_b][j]) return true;
  return false;
}

MeshMeasures mesh_measures(const SurfaceMesh& mesh) {
  MeshMeasures m;
  Vec3 weighted = Vec3::Zero();
  for (int t = 0; t < mesh.panel_count(); ++t) {
    m.area += mesh.area[t];
    // Signed tetrahedron against the origin.
    const double v6 = mesh.v0(t).cross(mesh.v1(t)).dot(mesh.v2(t));
    m.volume += v6 / 6.0;
    weighted += (v6 / 6.0) * (mesh.v0(t) + mesh.v1(t) + mesh.v2(t)) / 4.0;
  }
  if (m.volume != 0.0) m.centroid = weighted / m.volume;
  return m;
}

namespace {

void subdivide_panels(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& tris) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = static_cast<int>(verts.size());
    verts.push_back(0.5 * (verts[a] + verts[b]));
    midpoint.emplace(key, idx);
    return idx;
  };
  std::vector<std::array<int, 3>> out;
  out.reserve(tris.size() * 4);
  for (const auto& t : tris) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    out.push_back({t[0], ab, ca});
    out.push_back({t[1], bc, ab});
    out.push_back({t[2], ca, bc});
    out.push_back({ab, bc, ca});
  }
  tris = std::move(out);
}

SurfaceMesh unit_icosphere(int refinement) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
      {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
      {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (auto& v : verts) v.normalize();
  for (int r = 0; r < refinement; ++r) {
    subdivide_panels(verts, tris);
    for (auto& v : verts) v.normalize();
  }
  SurfaceMesh mesh;
  mesh.vertices = std::move(verts);
  mesh.triangles = std::move(tris);
  mesh.finalize();
  return mesh;
}

}  // namespace

SurfaceMesh make_ellipsoid(double ax, double ay, double az, int refinement) {
  if (!(ax > 0.0) || !(ay > 0.0) || !(az > 0.0))
    throw std::invalid_argument("ellipsoid semiaxes must be positive");
  if (refinement < 0) throw std::invalid_argument("refinement must be >= 0");
  SurfaceMesh mesh = unit_icosphere(refinement);
  for (auto& v : mesh.vertices) v = v.cwiseProduct(Vec3(ax, ay, az));
  mesh.finalize();
  return mesh;
}

SurfaceMesh make_sphere(double radius, int refinement) {
  return make_ellipsoid(radius, radius, radius, refinement);
}

SurfaceMesh make_box(double ex, double ey, double ez, int refinement) {
  if (!(ex > 0.0) || !(ey > 0.0) || !(ez > 0.0))
    throw std::invalid_argument("box extents must be positive");
  if (refinement < 0) throw std::invalid_argument("refinement must be >= 0");
  const double x = ex / 2.0, y = ey / 2.0, z = ez / 2.0;
  std::vector<Vec3> verts = {
      {-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
      {-x, -y, z}, {x, -y, z}, {x, y, z}, {-x, y, z}};
  std::vector<std::array<int, 3>> tris = {
      {0, 2, 1}, {0, 3, 2},   // z = -z/2, outward -z
      {4, 5, 6}, {4, 6, 7},   // z = +z/2
      {0, 1, 5}, {0, 5, 4},   // y = -y/2
      {2, 3, 7}, {2, 7, 6},   // y = +y/2
      {1, 2, 6}, {1, 6, 5},   // x = +x/2
      {3, 0, 4}, {3, 4, 7}};  // x = -x/2
  for (int r = 0; r < refinement; ++r) subdivide_panels(verts, tris);
  SurfaceMesh mesh;
  mesh.vertices = std::move(verts);
  mesh.triangles = std::move(tris);
  mesh.finalize();
  return mesh;
}

}  // namespace smallscat
