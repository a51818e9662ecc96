#pragma once

#include <string>

#include "smallscat/geometry.hpp"

namespace smallscat {

// Plain-text triangle format:
//   line 1:            <vertex count> <triangle count>
//   next nv lines:     x y z
//   next nt lines:     i0 i1 i2      (0-based, CCW seen from outside)
SurfaceMesh read_mesh_text(const std::string& path);
void write_mesh_text(const SurfaceMesh& mesh, const std::string& path);

// STL file (binary or ASCII, detected from content).  Stored facet normals are
// ignored: vertices are welded and normals recomputed from winding.  If the
// winding is consistent but inward, the whole mesh is flipped.
SurfaceMesh read_mesh_stl(const std::string& path);

// Dispatch on extension: ".stl" (any case) goes to the STL reader, everything
// else to the text reader.  The result is validated.
SurfaceMesh read_mesh(const std::string& path);

}  // namespace smallscat
