#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "smallscat/config.hpp"
#include "smallscat/csv_io.hpp"
#include "smallscat/errors.hpp"
#include "smallscat/run.hpp"

using namespace smallscat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string parse_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const InvalidConfiguration& e) {
    return e.what();
  }
  return "";
}

int count_data_rows(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  int rows = 0;
  bool seen_header = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header && line.find_first_not_of("0123456789-+.eE, ") != std::string::npos) {
      seen_header = true;
      continue;
    }
    ++rows;
  }
  return rows;
}

}  // namespace

TEST_CASE("tensor csv round-trips bitwise with its metadata") {
  TempDir dir("smallscat_csv_rt");
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(3, 4);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = cdouble(g(rng), g(rng));
  const CsvMeta meta = {{"n", "8"}, {"q_hat", format_g17(0.376)}};
  const std::string path = dir.file("t.csv");
  write_tensor_csv(path, m, meta);

  std::map<std::string, std::string> got_meta;
  const Eigen::MatrixXcd back = read_tensor_csv(path, &got_meta);
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(got_meta.at("n") == "8");
  CHECK(got_meta.at("q_hat") == format_g17(0.376));
}

TEST_CASE("g17 formatting survives the round trip") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double v = u(rng) * std::pow(10.0, int(20 * u(rng)));
    CHECK(std::stod(format_g17(v)) == v);
  }
}

TEST_CASE("voxel value csv reads back, absent voxels default to zero") {
  TempDir dir("smallscat_vox_rt");
  VoxelGrid grid;
  grid.nx = grid.ny = grid.nz = 3;
  grid.h = 0.5;
  std::vector<double> values(grid.count(), 0.0);
  for (int v = 0; v < grid.count(); v += 4) values[v] = 0.25 * v;
  const std::string path = dir.file("vals.csv");
  write_voxel_values_csv(path, grid, values);
  CHECK(read_voxel_values_csv(path, grid) == values);

  // sparse hand-written file: unmentioned voxels are zero
  {
    std::ofstream f(dir.file("sparse.csv"));
    f << "ix,iy,iz,value\n2,1,0,7.5\n0,0,2,-1.0\n";
  }
  const std::vector<double> sparse = read_voxel_values_csv(dir.file("sparse.csv"), grid);
  CHECK(sparse[grid.index(2, 1, 0)] == 7.5);
  CHECK(sparse[grid.index(0, 0, 2)] == -1.0);
  int nonzero = 0;
  for (double v : sparse) nonzero += v != 0.0;
  CHECK(nonzero == 2);

  // out-of-grid index is refused
  {
    std::ofstream f(dir.file("bad.csv"));
    f << "ix,iy,iz,value\n5,0,0,1.0\n";
  }
  CHECK_THROWS_AS(read_voxel_values_csv(dir.file("bad.csv"), grid), Error);
}

TEST_CASE("probe and voxel csv layouts") {
  TempDir dir("smallscat_csv_shape");
  const std::vector<Vec3> pts = {Vec3(0, 0, 1), Vec3(2, 0, 0)};
  std::vector<Vec6c> vals(2);
  vals[0] = Vec6c::Constant(cdouble(1.0, -2.0));
  vals[1] = Vec6c::Zero();
  write_probes_csv(dir.file("probes.csv"), pts, vals);
  const std::string text = slurp(dir.file("probes.csv"));
  CHECK(text.find("x,y,z,mask") == 0);
  CHECK(count_data_rows(dir.file("probes.csv")) == 2);

  VoxelGrid grid;
  grid.nx = 2;
  grid.ny = 1;
  grid.nz = 1;
  std::vector<Vec6c> u(grid.count(), Vec6c::Zero());
  write_voxel_csv(dir.file("vox.csv"), grid, u);
  CHECK(slurp(dir.file("vox.csv")).find("ix,iy,iz,Re E1") == 0);
  CHECK(count_data_rows(dir.file("vox.csv")) == grid.count());
  u.pop_back();
  CHECK_THROWS_AS(write_voxel_csv(dir.file("vox2.csv"), grid, u), InvalidConfiguration);
}

TEST_CASE("config parsing") {
  SUBCASE("defaults and complex forms") {
    const RunConfig cfg = parse_config_text(R"({
      "mode": "tensors",
      "context": {"k": 2.0, "eps0": 2.0, "mu0": 0.5},
      "series_order": 9,
      "particles": [
        {"shape": "sphere", "radius": 0.4, "refinement": 2, "material": {"eps": [2.5, 0.4]}},
        {"shape": "box", "size": [1, 2, 3], "material": {"eps": 3.0, "sigma": 0.2}},
        {"shape": "ellipsoid", "semi_axes": [1, 1, 2], "center": [5, 0, 0]}
      ]
    })");
    CHECK(cfg.mode == "tensors");
    CHECK(cfg.ctx.k == 2.0);
    CHECK(cfg.ctx.eps0 == 2.0);
    CHECK(cfg.ctx.mu0 == 0.5);
    CHECK(cfg.series_order == 9);
    REQUIRE(cfg.particles.size() == 3);
    CHECK(cfg.particles[0].eps == cdouble(2.5, 0.4));
    CHECK(cfg.particles[1].eps == cdouble(3.0, 0.0));
    CHECK(cfg.particles[1].sigma == 0.2);
    CHECK(cfg.particles[2].center == Vec3(5, 0, 0));
    CHECK_FALSE(cfg.has_incident);
    CHECK(cfg.route == "auto");
  }
  SUBCASE("errors name the offending field") {
    CHECK(parse_error(R"({"context": {"k": 1}})").find("mode") != std::string::npos);
    CHECK(parse_error(R"({"mode": "wibble"})").find("must be one of tensors") !=
          std::string::npos);
    CHECK(parse_error(R"({"mode": "tensors", "context": {"k": -1},
                          "particles": [{"shape": "sphere"}]})")
              .find("context.k") != std::string::npos);
    CHECK(parse_error(R"({"mode": "tensors",
                          "particles": [{"shape": "sphere", "radius": 0}]})")
              .find("particles[0].radius") != std::string::npos);
    CHECK(parse_error(R"({"mode": "nbody",
                          "particles": [{"shape": "ball", "radius": 1}]})")
              .find("incident") != std::string::npos);
    CHECK(parse_error(R"({"mode": "medium",
                          "incident": {"direction": [0,0,1], "E0": [1,0,0]},
                          "medium": {"grid": {"spacing": 1, "shape": [2,2,2]},
                                     "q": 0.1, "density": 1.0}})")
              .find("exactly one of") != std::string::npos);
    CHECK(parse_error(R"({"mode": "nbody",
                          "incident": {"direction": [0,0,1], "E0": [1,0,0]},
                          "lattice": {"count": 8, "spacing": 2}})")
              .find("particles[0]") != std::string::npos);
    CHECK(parse_error("{ not json").find("config parse") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_config("/nonexistent/rc.json"), InvalidConfiguration);
  }
}

TEST_CASE("lattice positions") {
  SUBCASE("full cube without jitter is exact and centered") {
    const std::vector<Vec3> pts = lattice_positions(8, 2.0, 0.0, 1);
    REQUIRE(pts.size() == 8);
    std::set<std::string> seen;
    for (const Vec3& p : pts) {
      for (int c = 0; c < 3; ++c) CHECK(std::abs(std::abs(p[c]) - 1.0) < 1e-15);
      std::ostringstream os;
      os << p.transpose();
      seen.insert(os.str());
    }
    CHECK(seen.size() == 8);
  }
  SUBCASE("truncated count and jitter bounds") {
    const double spacing = 3.0, jitter = 0.4;
    const std::vector<Vec3> base = lattice_positions(10, spacing, 0.0, 7);
    const std::vector<Vec3> jit = lattice_positions(10, spacing, jitter, 7);
    REQUIRE(base.size() == 10);
    REQUIRE(jit.size() == 10);
    for (size_t i = 0; i < base.size(); ++i)
      CHECK((jit[i] - base[i]).cwiseAbs().maxCoeff() <= 0.5 * jitter * spacing + 1e-12);
  }
  SUBCASE("deterministic in the seed") {
    const std::vector<Vec3> a = lattice_positions(27, 1.0, 0.3, 42);
    const std::vector<Vec3> b = lattice_positions(27, 1.0, 0.3, 42);
    const std::vector<Vec3> c = lattice_positions(27, 1.0, 0.3, 43);
    REQUIRE(a.size() == b.size());
    double same = 0.0, other = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      same = std::max(same, (a[i] - b[i]).norm());
      other = std::max(other, (a[i] - c[i]).norm());
    }
    CHECK(same == 0.0);
    CHECK(other > 1e-6);
  }
}

TEST_CASE("tensor run writes its artifacts") {
  TempDir dir("smallscat_run_tensors");
  std::ostringstream cfg_text;
  cfg_text << R"({
    "mode": "tensors",
    "context": {"k": 1.0},
    "series_order": 6,
    "output_dir": ")" << dir.file("out") << R"(",
    "particles": [{"shape": "sphere", "radius": 1.0, "refinement": 2,
                   "material": {"eps": 3.0}}]
  })";
  const RunConfig cfg = parse_config_text(cfg_text.str());
  const RunReport rep = run(cfg);
  CHECK(rep.mode == "tensors");
  CHECK(rep.particle_count == 1);

  const std::string alpha_path = dir.file("out") + "/alpha_0.csv";
  REQUIRE(fs::exists(alpha_path));
  std::map<std::string, std::string> meta;
  const Eigen::MatrixXcd alpha = read_tensor_csv(alpha_path, &meta);
  REQUIRE(alpha.rows() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(alpha(i, i) - cdouble(1.2, 0.0)) < 0.03);
  CHECK(meta.count("n") == 1);

  REQUIRE(fs::exists(dir.file("out") + "/report.json"));
  const nlohmann::json j = nlohmann::json::parse(slurp(dir.file("out") + "/report.json"));
  CHECK(j.at("mode") == "tensors");
  CHECK_FALSE(j.contains("seconds"));
  bool listed = false;
  for (const auto& o : rep.outputs) listed = listed || o == "alpha_0.csv";
  CHECK(listed);
}

TEST_CASE("nbody runs are byte-identical for a fixed seed") {
  TempDir dir("smallscat_run_nbody");
  auto config_for = [&](const std::string& out, unsigned lattice_seed) {
    std::ostringstream os;
    os << R"({
      "mode": "nbody",
      "context": {"k": 1.0},
      "output_dir": ")" << dir.file(out) << R"(",
      "particles": [{"shape": "ball", "radius": 0.1, "material": {"eps": 3.0}}],
      "lattice": {"count": 8, "spacing": 25.0, "jitter": 0.3, "seed": )" << lattice_seed << R"(},
      "incident": {"direction": [0, 0, 1], "E0": [1, 0, 0]}
    })";
    return parse_config_text(os.str());
  };
  const RunReport r1 = run(config_for("a", 5));
  const RunReport r2 = run(config_for("b", 5));
  const RunReport r3 = run(config_for("c", 6));
  CHECK(r1.particle_count == 8);
  CHECK(slurp(dir.file("a") + "/report.json") == slurp(dir.file("b") + "/report.json"));
  CHECK(slurp(dir.file("a") + "/local_fields.csv") == slurp(dir.file("b") + "/local_fields.csv"));
  CHECK(slurp(dir.file("a") + "/local_fields.csv") != slurp(dir.file("c") + "/local_fields.csv"));
  (void)r3;
}

TEST_CASE("validate reports without writing") {
  TempDir dir("smallscat_validate");
  std::ostringstream os;
  os << R"({
    "mode": "nbody",
    "context": {"k": 1.0},
    "output_dir": ")" << dir.file("never") << R"(",
    "particles": [{"shape": "ball", "radius": 0.1, "material": {"eps": 3.0}}],
    "lattice": {"count": 8, "spacing": 25.0},
    "incident": {"direction": [0, 0, 1], "E0": [1, 0, 0]}
  })";
  const RunReport rep = validate(parse_config_text(os.str()));
  CHECK(rep.route == "validate");
  CHECK(rep.outputs.empty());
  CHECK_FALSE(fs::exists(dir.file("never")));
  bool has_bound = false;
  for (const auto& [key, value] : rep.metrics) has_bound = has_bound || key == "dominance_bound";
  CHECK(has_bound);
}
