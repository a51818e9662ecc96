#include "smallscat/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "smallscat/errors.hpp"

namespace smallscat {

namespace {

[[noreturn]] void bad_file(const std::string& path, const std::string& what) {
  throw InvalidConfiguration("mesh file '" + path + "': " + what);
}

// Welds exactly equal coordinates; STL writers repeat shared vertices verbatim.
struct VertexWelder {
  std::map<std::array<double, 3>, int> index;
  std::vector<Vec3> verts;

  int add(const Vec3& v) {
    std::array<double, 3> key = {v.x(), v.y(), v.z()};
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back(v);
    index.emplace(key, id);
    return id;
  }
};

SurfaceMesh finish(std::vector<Vec3> verts, std::vector<std::array<int, 3>> tris,
                   const std::string& path, bool allow_flip) {
  SurfaceMesh mesh;
  mesh.vertices = std::move(verts);
  mesh.triangles = std::move(tris);
  if (mesh.panel_count() == 0) bad_file(path, "no triangles");
  if (allow_flip) {
    double vol6 = 0.0;
    for (int t = 0; t < mesh.panel_count(); ++t)
      vol6 += mesh.v0(t).cross(mesh.v1(t)).dot(mesh.v2(t));
    if (vol6 < 0.0)
      for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  }
  mesh.finalize();
  mesh.validate();
  return mesh;
}

}  // namespace

SurfaceMesh read_mesh_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad_file(path, "cannot open");
  int nv = 0, nt = 0;
  if (!(in >> nv >> nt) || nv <= 0 || nt <= 0) bad_file(path, "bad header (expect 'nv nt')");
  std::vector<Vec3> verts(nv);
  for (int i = 0; i < nv; ++i)
    if (!(in >> verts[i].x() >> verts[i].y() >> verts[i].z()))
      bad_file(path, "bad vertex line " + std::to_string(i));
  std::vector<std::array<int, 3>> tris(nt);
  for (int i = 0; i < nt; ++i) {
    if (!(in >> tris[i][0] >> tris[i][1] >> tris[i][2]))
      bad_file(path, "bad triangle line " + std::to_string(i));
    for (int k = 0; k < 3; ++k)
      if (tris[i][k] < 0 || tris[i][k] >= nv)
        bad_file(path, "triangle " + std::to_string(i) + " references vertex out of range");
  }
  return finish(std::move(verts), std::move(tris), path, false);
}

void write_mesh_text(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidConfiguration("cannot write mesh file '" + path + "'");
  out.precision(17);
  out << mesh.vertex_count() << " " << mesh.panel_count() << "\n";
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.triangles) out << t[0] << " " << t[1] << " " << t[2] << "\n";
}

SurfaceMesh read_mesh_stl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_file(path, "cannot open");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 15) bad_file(path, "truncated");

  // Binary layout: 80-byte header, uint32 count, 50 bytes per facet.  An ASCII
  // file starts with "solid" and its size will not match the binary formula.
  bool binary = true;
  if (data.size() >= 84) {
    uint32_t n = 0;
    std::memcpy(&n, data.data() + 80, 4);
    binary = (data.size() == 84 + static_cast<size_t>(n) * 50);
  } else {
    binary = false;
  }

  VertexWelder weld;
  std::vector<std::array<int, 3>> tris;

  if (binary) {
    uint32_t n = 0;
    std::memcpy(&n, data.data() + 80, 4);
    for (uint32_t f = 0; f < n; ++f) {
      const char* rec = data.data() + 84 + static_cast<size_t>(f) * 50;
      std::array<int, 3> tri{};
      for (int v = 0; v < 3; ++v) {
        float xyz[3];
        std::memcpy(xyz, rec + 12 + 12 * v, 12);  // skip stored normal
        tri[v] = weld.add(Vec3(xyz[0], xyz[1], xyz[2]));
      }
      tris.push_back(tri);
    }
  } else {
    std::istringstream ss(std::string(data.begin(), data.end()));
    std::string tok;
    std::vector<Vec3> facet;
    while (ss >> tok) {
      std::transform(tok.begin(), tok.end(), tok.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (tok == "vertex") {
        Vec3 v;
        if (!(ss >> v.x() >> v.y() >> v.z())) bad_file(path, "bad vertex in ASCII STL");
        facet.push_back(v);
      } else if (tok == "endfacet") {
        if (facet.size() != 3) bad_file(path, "facet without exactly 3 vertices");
        tris.push_back({weld.add(facet[0]), weld.add(facet[1]), weld.add(facet[2])});
        facet.clear();
      }
    }
  }
  return finish(std::move(weld.verts), std::move(tris), path, true);
}

SurfaceMesh read_mesh(const std::string& path) {
  std::string ext;
  const auto dot = path.find_last_of('.');
  if (dot != std::string::npos) ext = path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".stl" ? read_mesh_stl(path) : read_mesh_text(path);
}

}  // namespace smallscat
