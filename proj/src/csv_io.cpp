#include "smallscat/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "smallscat/errors.hpp"

#include <json.hpp>

namespace smallscat {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path);
  return f;
}

void put_meta(std::ofstream& f, const CsvMeta& meta) {
  for (const auto& [key, value] : meta) f << "# " << key << " = " << value << "\n";
}

std::vector<double> split_numbers(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw Error(path + ": not a number: '" + cell + "'");
    }
  }
  return out;
}

void put_six(std::ofstream& f, const Vec6c& u) {
  for (int c = 0; c < 6; ++c)
    f << ',' << format_g17(u(c).real()) << ',' << format_g17(u(c).imag());
}

}  // namespace

void write_tensor_csv(const std::string& path, const Eigen::MatrixXcd& m,
                      const CsvMeta& meta) {
  std::ofstream f = open_out(path);
  put_meta(f, meta);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) f << ',';
      f << format_g17(m(r, c).real()) << ',' << format_g17(m(r, c).imag());
    }
    f << '\n';
  }
}

Eigen::MatrixXcd read_tensor_csv(const std::string& path,
                                 std::map<std::string, std::string>* meta) {
  std::ifstream f = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (meta && eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        std::string value = line.substr(eq + 1);
        const auto strip = [](std::string& s) {
          s.erase(0, s.find_first_not_of(" \t"));
          s.erase(s.find_last_not_of(" \t") + 1);
        };
        strip(key);
        strip(value);
        (*meta)[key] = value;
      }
      continue;
    }
    rows.push_back(split_numbers(line, path));
  }
  if (rows.empty()) throw Error(path + ": no data rows");
  const size_t width = rows.front().size();
  if (width % 2 != 0) throw Error(path + ": odd column count, expected re,im pairs");
  Eigen::MatrixXcd m(rows.size(), width / 2);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw Error(path + ": ragged rows");
    for (size_t c = 0; c < width / 2; ++c)
      m(r, c) = cdouble(rows[r][2 * c], rows[r][2 * c + 1]);
  }
  return m;
}

void write_field_csv(const std::string& path, const FieldGrid& grid) {
  std::ofstream f = open_out(path);
  f << "x,y,z,mask,Re E1,Im E1,Re E2,Im E2,Re E3,Im E3,"
       "Re H1,Im H1,Re H2,Im H2,Re H3,Im H3\n";
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix) {
        const int idx = grid.index(ix, iy, iz);
        const Vec3 p = grid.point(ix, iy, iz);
        f << format_g17(p.x()) << ',' << format_g17(p.y()) << ',' << format_g17(p.z())
          << ',' << int(grid.mask[idx]);
        put_six(f, grid.values[idx]);
        f << '\n';
      }
}

void write_probes_csv(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<Vec6c>& values) {
  if (points.size() != values.size())
    throw InvalidConfiguration("probe point and value counts differ");
  std::ofstream f = open_out(path);
  f << "x,y,z,mask,Re E1,Im E1,Re E2,Im E2,Re E3,Im E3,"
       "Re H1,Im H1,Re H2,Im H2,Re H3,Im H3\n";
  for (size_t i = 0; i < points.size(); ++i) {
    f << format_g17(points[i].x()) << ',' << format_g17(points[i].y()) << ','
      << format_g17(points[i].z()) << ",1";
    put_six(f, values[i]);
    f << '\n';
  }
}

void write_voxel_csv(const std::string& path, const VoxelGrid& grid,
                     const std::vector<Vec6c>& u) {
  if (static_cast<int>(u.size()) != grid.count())
    throw InvalidConfiguration("voxel value count does not match the grid");
  std::ofstream f = open_out(path);
  f << "ix,iy,iz,Re E1,Im E1,Re E2,Im E2,Re E3,Im E3,"
       "Re H1,Im H1,Re H2,Im H2,Re H3,Im H3\n";
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix) {
        f << ix << ',' << iy << ',' << iz;
        put_six(f, u[grid.index(ix, iy, iz)]);
        f << '\n';
      }
}

void write_voxel_sidecar(const std::string& path, const VoxelGrid& grid, double k) {
  nlohmann::json j;
  j["origin"] = {grid.origin.x(), grid.origin.y(), grid.origin.z()};
  j["spacing"] = grid.h;
  j["shape"] = {grid.nx, grid.ny, grid.nz};
  j["k"] = k;
  std::ofstream f = open_out(path);
  f << j.dump(2) << '\n';
}

void write_voxel_values_csv(const std::string& path, const VoxelGrid& grid,
                            const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != grid.count())
    throw InvalidConfiguration("voxel value count does not match the grid");
  std::ofstream f = open_out(path);
  f << "ix,iy,iz,value\n";
  for (int iz = 0; iz < grid.nz; ++iz)
    for (int iy = 0; iy < grid.ny; ++iy)
      for (int ix = 0; ix < grid.nx; ++ix)
        f << ix << ',' << iy << ',' << iz << ','
          << format_g17(values[grid.index(ix, iy, iz)]) << '\n';
}

std::vector<double> read_voxel_values_csv(const std::string& path, const VoxelGrid& grid) {
  std::ifstream f = open_in(path);
  std::vector<double> values(grid.count(), 0.0);
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.find("ix") != std::string::npos) {
      first = false;
      continue;  // header row
    }
    first = false;
    const std::vector<double> cells = split_numbers(line, path);
    if (cells.size() != 4) throw Error(path + ": expected ix,iy,iz,value rows");
    const int ix = static_cast<int>(cells[0]);
    const int iy = static_cast<int>(cells[1]);
    const int iz = static_cast<int>(cells[2]);
    if (ix < 0 || ix >= grid.nx || iy < 0 || iy >= grid.ny || iz < 0 || iz >= grid.nz)
      throw Error(path + ": voxel index outside the grid");
    values[grid.index(ix, iy, iz)] = cells[3];
  }
  return values;
}

void write_currents_csv(const std::string& path, const SurfacePanels& panels,
                        const CurrentSolution& cur) {
  std::ofstream f = open_out(path);
  f << "panel_id,cx,cy,cz,Re j1,Im j1,Re j2,Im j2,Re j3,Im j3\n";
  for (int i = 0; i < panels.count(); ++i) {
    const Vec3& c = panels.colloc[i];
    const Vec3c j = cur.current(panels, i);
    f << i << ',' << format_g17(c.x()) << ',' << format_g17(c.y()) << ','
      << format_g17(c.z());
    for (int m = 0; m < 3; ++m)
      f << ',' << format_g17(j(m).real()) << ',' << format_g17(j(m).imag());
    f << '\n';
  }
}

}  // namespace smallscat
