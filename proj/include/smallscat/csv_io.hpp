#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "smallscat/medium.hpp"
#include "smallscat/multiparticle.hpp"
#include "smallscat/nearfield.hpp"

namespace smallscat {

// Ordered key/value pairs rendered as "# key = value" comment lines ahead of
// the data rows.
using CsvMeta = std::vector<std::pair<std::string, std::string>>;

std::string format_g17(double v);

// Complex matrix, one row per line, row-major re,im pairs.
void write_tensor_csv(const std::string& path, const Eigen::MatrixXcd& m,
                      const CsvMeta& meta = {});
Eigen::MatrixXcd read_tensor_csv(const std::string& path,
                                 std::map<std::string, std::string>* meta = nullptr);

// Sampled field grid: x,y,z,mask,Re E1,Im E1,...,Im H3.  Masked-out rows keep
// zero field columns.
void write_field_csv(const std::string& path, const FieldGrid& grid);

// Probe list in the same column layout, mask always 1.
void write_probes_csv(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<Vec6c>& values);

// Voxel field: ix,iy,iz,Re E1,...,Im H3, with grid geometry in a JSON sidecar.
void write_voxel_csv(const std::string& path, const VoxelGrid& grid,
                     const std::vector<Vec6c>& u);
void write_voxel_sidecar(const std::string& path, const VoxelGrid& grid, double k);

// Scalar per-voxel values (densities): ix,iy,iz,value.  Voxels absent from the
// file read back as zero.
void write_voxel_values_csv(const std::string& path, const VoxelGrid& grid,
                            const std::vector<double>& values);
std::vector<double> read_voxel_values_csv(const std::string& path, const VoxelGrid& grid);

// Surface current: panel_id,cx,cy,cz,Re j1,Im j1,Re j2,Im j2,Re j3,Im j3 with
// the current given as a Cartesian 3-vector at the panel collocation point.
void write_currents_csv(const std::string& path, const SurfacePanels& panels,
                        const CurrentSolution& cur);

}  // namespace smallscat
