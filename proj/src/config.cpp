#include "smallscat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "smallscat/errors.hpp"

#include <json.hpp>

namespace smallscat {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidConfiguration("config: " + where + " " + what);
}

double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "must be a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "must be an integer");
  return j.get<int>();
}

bool get_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) fail(where, "must be true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "must be a string");
  return j.get<std::string>();
}

// A complex entry is either a plain number or [re, im].
cdouble get_complex(const json& j, const std::string& where) {
  if (j.is_number()) return cdouble(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return cdouble(j[0].get<double>(), j[1].get<double>());
  fail(where, "must be a number or [re, im]");
}

Vec3 get_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "must be [x, y, z]");
  return Vec3(get_number(j[0], where), get_number(j[1], where), get_number(j[2], where));
}

Vec3c get_cvec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "must have three entries");
  Vec3c v;
  for (int i = 0; i < 3; ++i) v(i) = get_complex(j[i], where);
  return v;
}

ParticleSpec parse_particle(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "must be an object");
  ParticleSpec p;
  static const std::set<std::string> shapes = {"sphere", "ball", "ellipsoid", "box", "mesh"};
  if (j.contains("shape")) p.shape = get_string(j["shape"], where + ".shape");
  if (!shapes.count(p.shape))
    fail(where + ".shape", "must be one of sphere, ball, ellipsoid, box, mesh");
  if (j.contains("radius")) p.radius = get_number(j["radius"], where + ".radius");
  if (j.contains("semi_axes")) p.semi_axes = get_vec3(j["semi_axes"], where + ".semi_axes");
  if (j.contains("size")) p.size = get_vec3(j["size"], where + ".size");
  if (j.contains("path")) p.path = get_string(j["path"], where + ".path");
  if (j.contains("refinement")) p.refinement = get_int(j["refinement"], where + ".refinement");
  if (j.contains("center")) p.center = get_vec3(j["center"], where + ".center");

  if ((p.shape == "sphere" || p.shape == "ball") && !(p.radius > 0.0))
    fail(where + ".radius", "must be > 0");
  if (p.shape == "ellipsoid" && !(p.semi_axes.minCoeff() > 0.0))
    fail(where + ".semi_axes", "must be positive");
  if (p.shape == "box" && !(p.size.minCoeff() > 0.0))
    fail(where + ".size", "must be positive");
  if (p.shape == "mesh" && p.path.empty()) fail(where + ".path", "is required for shape mesh");
  if (p.refinement < 0 || p.refinement > 7) fail(where + ".refinement", "must be in 0..7");

  if (j.contains("material")) {
    const json& m = j["material"];
    const std::string mw = where + ".material";
    if (!m.is_object()) fail(mw, "must be an object");
    if (m.contains("eps")) p.eps = get_complex(m["eps"], mw + ".eps");
    if (m.contains("mu")) p.mu = get_number(m["mu"], mw + ".mu");
    if (m.contains("sigma")) p.sigma = get_number(m["sigma"], mw + ".sigma");
    if (m.contains("pec")) p.pec = get_bool(m["pec"], mw + ".pec");
    if (!p.pec) {
      if (!(p.mu > 0.0)) fail(mw + ".mu", "must be > 0");
      if (p.sigma < 0.0) fail(mw + ".sigma", "must be >= 0");
    }
  }
  return p;
}

VoxelGrid parse_voxel_grid(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "must be an object");
  VoxelGrid g;
  if (!j.contains("spacing")) fail(where + ".spacing", "is required");
  g.h = get_number(j["spacing"], where + ".spacing");
  if (!(g.h > 0.0)) fail(where + ".spacing", "must be > 0");
  if (!j.contains("shape")) fail(where + ".shape", "is required");
  const json& s = j["shape"];
  if (!s.is_array() || s.size() != 3) fail(where + ".shape", "must be [nx, ny, nz]");
  g.nx = get_int(s[0], where + ".shape");
  g.ny = get_int(s[1], where + ".shape");
  g.nz = get_int(s[2], where + ".shape");
  if (g.nx < 1 || g.ny < 1 || g.nz < 1) fail(where + ".shape", "must be >= 1 per axis");
  if (j.contains("origin")) g.origin = get_vec3(j["origin"], where + ".origin");
  return g;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidConfiguration(std::string("config parse: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfiguration("config: top level must be an object");

  RunConfig cfg;
  if (!j.contains("mode")) fail("mode", "is required");
  cfg.mode = get_string(j["mode"], "mode");
  static const std::set<std::string> modes = {"tensors", "single", "nbody", "medium",
                                             "nearfield"};
  if (!modes.count(cfg.mode))
    fail("mode", "must be one of tensors, single, nbody, medium, nearfield");

  double k = 1.0, eps0 = 1.0, mu0 = 1.0;
  if (j.contains("context")) {
    const json& c = j["context"];
    if (!c.is_object()) fail("context", "must be an object");
    if (c.contains("k")) k = get_number(c["k"], "context.k");
    if (c.contains("eps0")) eps0 = get_number(c["eps0"], "context.eps0");
    if (c.contains("mu0")) mu0 = get_number(c["mu0"], "context.mu0");
  }
  if (!(k > 0.0)) fail("context.k", "must be > 0");
  if (!(eps0 > 0.0) || !(mu0 > 0.0)) fail("context", "eps0 and mu0 must be > 0");
  cfg.ctx = WaveContext(k, eps0, mu0);

  if (j.contains("seed")) cfg.seed = static_cast<unsigned>(get_int(j["seed"], "seed"));
  if (j.contains("output_dir")) cfg.output_dir = get_string(j["output_dir"], "output_dir");
  if (j.contains("series_order")) {
    cfg.series_order = get_int(j["series_order"], "series_order");
    if (cfg.series_order < 1) fail("series_order", "must be >= 1");
  }
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    if (!q.is_object()) fail("quadrature", "must be an object");
    if (q.contains("order")) cfg.quadrature.order = get_int(q["order"], "quadrature.order");
    if (q.contains("near_refine"))
      cfg.quadrature.near_refine = get_int(q["near_refine"], "quadrature.near_refine");
    if (q.contains("panel_budget"))
      cfg.quadrature.panel_budget = get_int(q["panel_budget"], "quadrature.panel_budget");
  }

  if (j.contains("particles")) {
    const json& ps = j["particles"];
    if (!ps.is_array()) fail("particles", "must be an array");
    for (size_t i = 0; i < ps.size(); ++i)
      cfg.particles.push_back(
          parse_particle(ps[i], "particles[" + std::to_string(i) + "]"));
  }

  if (j.contains("lattice")) {
    const json& l = j["lattice"];
    if (!l.is_object()) fail("lattice", "must be an object");
    LatticeSpec lat;
    if (!l.contains("count")) fail("lattice.count", "is required");
    lat.count = get_int(l["count"], "lattice.count");
    if (lat.count < 1) fail("lattice.count", "must be >= 1");
    if (!l.contains("spacing")) fail("lattice.spacing", "is required");
    lat.spacing = get_number(l["spacing"], "lattice.spacing");
    if (!(lat.spacing > 0.0)) fail("lattice.spacing", "must be > 0");
    if (l.contains("jitter")) lat.jitter = get_number(l["jitter"], "lattice.jitter");
    if (lat.jitter < 0.0 || lat.jitter > 0.5)
      fail("lattice.jitter", "must be in [0, 0.5]");
    if (l.contains("seed")) lat.seed = static_cast<unsigned>(get_int(l["seed"], "lattice.seed"));
    if (cfg.particles.empty()) fail("lattice", "needs particles[0] as the template");
    cfg.lattice = lat;
  }

  if (j.contains("incident")) {
    const json& inc = j["incident"];
    if (!inc.is_object()) fail("incident", "must be an object");
    if (inc.contains("direction"))
      cfg.incident_direction = get_vec3(inc["direction"], "incident.direction");
    if (!(cfg.incident_direction.norm() > 0.0))
      fail("incident.direction", "must be nonzero");
    cfg.incident_direction.normalize();
    if (inc.contains("E0")) cfg.incident_E0 = get_cvec3(inc["E0"], "incident.E0");
    cfg.has_incident = true;
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    if (!s.is_object()) fail("solver", "must be an object");
    if (s.contains("tol")) cfg.solver.tol = get_number(s["tol"], "solver.tol");
    if (!(cfg.solver.tol > 0.0)) fail("solver.tol", "must be > 0");
    if (s.contains("max_iter")) cfg.solver.max_iter = get_int(s["max_iter"], "solver.max_iter");
    if (cfg.solver.max_iter < 1) fail("solver.max_iter", "must be >= 1");
    if (s.contains("dense_cap")) cfg.solver.dense_cap = get_int(s["dense_cap"], "solver.dense_cap");
    if (s.contains("strict_dominance"))
      cfg.solver.strict_dominance = get_bool(s["strict_dominance"], "solver.strict_dominance");
    if (s.contains("route")) cfg.route = get_string(s["route"], "solver.route");
    if (cfg.route != "auto" && cfg.route != "direct" && cfg.route != "fixed_point")
      fail("solver.route", "must be auto, direct or fixed_point");
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_object()) fail("grid", "must be an object");
    GridSpec gs;
    if (!g.contains("lo") || !g.contains("hi")) fail("grid", "needs lo and hi corners");
    gs.lo = get_vec3(g["lo"], "grid.lo");
    gs.hi = get_vec3(g["hi"], "grid.hi");
    if (!g.contains("shape")) fail("grid.shape", "is required");
    const json& s = g["shape"];
    if (!s.is_array() || s.size() != 3) fail("grid.shape", "must be [nx, ny, nz]");
    gs.nx = get_int(s[0], "grid.shape");
    gs.ny = get_int(s[1], "grid.shape");
    gs.nz = get_int(s[2], "grid.shape");
    if (gs.nx < 1 || gs.ny < 1 || gs.nz < 1) fail("grid.shape", "must be >= 1 per axis");
    if (g.contains("guard_margin"))
      gs.guard_margin = get_number(g["guard_margin"], "grid.guard_margin");
    cfg.grid = gs;
  }

  if (j.contains("directions")) {
    const json& ds = j["directions"];
    if (!ds.is_array()) fail("directions", "must be an array of [x, y, z]");
    for (size_t i = 0; i < ds.size(); ++i) {
      Vec3 d = get_vec3(ds[i], "directions[" + std::to_string(i) + "]");
      if (!(d.norm() > 0.0)) fail("directions[" + std::to_string(i) + "]", "must be nonzero");
      cfg.directions.push_back(d.normalized());
    }
  }

  if (j.contains("medium")) {
    const json& m = j["medium"];
    if (!m.is_object()) fail("medium", "must be an object");
    MediumSpec ms;
    if (!m.contains("grid")) fail("medium.grid", "is required");
    ms.grid = parse_voxel_grid(m["grid"], "medium.grid");
    const int sources = int(m.contains("q")) + int(m.contains("q_csv")) +
                        int(m.contains("density")) + int(m.contains("density_csv"));
    if (sources != 1)
      fail("medium", "needs exactly one of q, q_csv, density, density_csv");
    if (m.contains("q")) {
      ms.source = MediumSpec::Source::scalar;
      ms.q = get_complex(m["q"], "medium.q");
    } else if (m.contains("q_csv")) {
      ms.source = MediumSpec::Source::scalar_csv;
      ms.csv = get_string(m["q_csv"], "medium.q_csv");
    } else if (m.contains("density")) {
      ms.source = MediumSpec::Source::density;
      ms.density = get_number(m["density"], "medium.density");
      if (ms.density < 0.0) fail("medium.density", "must be >= 0");
    } else {
      ms.source = MediumSpec::Source::density_csv;
      ms.csv = get_string(m["density_csv"], "medium.density_csv");
    }
    if (ms.source == MediumSpec::Source::density ||
        ms.source == MediumSpec::Source::density_csv) {
      if (cfg.particles.empty())
        fail("medium", "density input needs particles[0] as the template");
    }
    if (m.contains("direction_level")) {
      ms.direction_level = get_int(m["direction_level"], "medium.direction_level");
      if (ms.direction_level < 0 || ms.direction_level > 4)
        fail("medium.direction_level", "must be in 0..4");
    }
    if (m.contains("solver")) {
      const json& s = m["solver"];
      if (!s.is_object()) fail("medium.solver", "must be an object");
      if (s.contains("tol")) ms.solver.tol = get_number(s["tol"], "medium.solver.tol");
      if (!(ms.solver.tol > 0.0)) fail("medium.solver.tol", "must be > 0");
      if (s.contains("max_iter"))
        ms.solver.max_iter = get_int(s["max_iter"], "medium.solver.max_iter");
      if (s.contains("force_direct"))
        ms.solver.force_direct = get_bool(s["force_direct"], "medium.solver.force_direct");
      if (s.contains("direct_cap"))
        ms.solver.direct_cap = get_int(s["direct_cap"], "medium.solver.direct_cap");
    }
    if (m.contains("limit")) {
      const json& l = m["limit"];
      if (!l.is_object()) fail("medium.limit", "must be an object");
      ms.has_limit = true;
      if (l.contains("eps")) ms.limit_eps = get_complex(l["eps"], "medium.limit.eps");
      if (l.contains("sigma")) ms.limit_sigma = get_number(l["sigma"], "medium.limit.sigma");
      if (l.contains("omega")) ms.limit_omega = get_number(l["omega"], "medium.limit.omega");
      if (!(ms.limit_omega > 0.0)) fail("medium.limit.omega", "must be > 0");
      if (l.contains("a_over_d"))
        ms.limit_a_over_d = get_number(l["a_over_d"], "medium.limit.a_over_d");
      if (!(ms.limit_a_over_d > 0.0) || ms.limit_a_over_d >= 1.0)
        fail("medium.limit.a_over_d", "must be in (0, 1)");
      if (l.contains("kappa")) ms.limit_kappa = get_complex(l["kappa"], "medium.limit.kappa");
    }
    cfg.medium = ms;
  }

  if (j.contains("nearfield")) {
    const json& n = j["nearfield"];
    if (!n.is_object()) fail("nearfield", "must be an object");
    NearfieldSpec ns;
    if (n.contains("particle")) ns.particle = get_int(n["particle"], "nearfield.particle");
    if (n.contains("probes")) {
      const json& ps = n["probes"];
      if (!ps.is_array()) fail("nearfield.probes", "must be an array of [x, y, z]");
      for (size_t i = 0; i < ps.size(); ++i)
        ns.probes.push_back(get_vec3(ps[i], "nearfield.probes[" + std::to_string(i) + "]"));
    }
    if (n.contains("residual_check"))
      ns.residual_check = get_bool(n["residual_check"], "nearfield.residual_check");
    if (n.contains("tol")) ns.options.tol = get_number(n["tol"], "nearfield.tol");
    if (n.contains("max_iter")) ns.options.max_iter = get_int(n["max_iter"], "nearfield.max_iter");
    if (n.contains("defect_steps"))
      ns.options.defect_steps = get_int(n["defect_steps"], "nearfield.defect_steps");
    cfg.nearfield = ns;
  }

  // mode-specific presence checks
  if (cfg.mode == "tensors" || cfg.mode == "single") {
    if (cfg.particles.empty()) fail("particles", "at least one is required for this mode");
  }
  if (cfg.mode == "nbody" || cfg.mode == "medium" || cfg.mode == "nearfield") {
    if (!cfg.has_incident) fail("incident", "is required for this mode");
  }
  if (cfg.mode == "medium" && !cfg.medium) fail("medium", "section is required for this mode");
  if (cfg.mode == "nearfield") {
    if (cfg.particles.empty()) fail("particles", "at least one is required for this mode");
    const int target = cfg.nearfield ? cfg.nearfield->particle : 0;
    const int n = cfg.lattice ? cfg.lattice->count : static_cast<int>(cfg.particles.size());
    if (target < 0 || target >= n) fail("nearfield.particle", "is outside the scene");
    if (!cfg.nearfield) cfg.nearfield = NearfieldSpec{};
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidConfiguration("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace smallscat
