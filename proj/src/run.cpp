#include "smallscat/run.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "smallscat/csv_io.hpp"
#include "smallscat/errors.hpp"
#include "smallscat/mesh_io.hpp"
#include "smallscat/polarizability.hpp"

namespace smallscat {
namespace {

MaterialContrast material_from(const ParticleSpec& p, const WaveContext& ctx, double scale) {
  if (p.pec) return MaterialContrast::perfect_conductor(ctx.omega(), ctx.eps0, ctx.mu0);
  return MaterialContrast(p.eps, p.mu, p.sigma, ctx.omega(), ctx.eps0, ctx.mu0, scale);
}

// Mesh in the particle body frame; the center translates it later.
SurfaceMesh spec_mesh(const ParticleSpec& p) {
  if (p.shape == "sphere") return make_sphere(p.radius, p.refinement);
  if (p.shape == "ellipsoid")
    return make_ellipsoid(p.semi_axes.x(), p.semi_axes.y(), p.semi_axes.z(), p.refinement);
  if (p.shape == "box") return make_box(p.size.x(), p.size.y(), p.size.z(), p.refinement);
  if (p.shape == "mesh") return read_mesh(p.path);
  throw InvalidConfiguration("shape '" + p.shape + "' has no surface mesh");
}

// Geometry and material only; the center is excluded so translated copies
// share one tensor computation.
std::string spec_key(const ParticleSpec& p) {
  std::ostringstream os;
  os.precision(17);
  os << p.shape << '|' << p.radius << '|' << p.semi_axes.transpose() << '|'
     << p.size.transpose() << '|' << p.path << '|' << p.refinement << '|' << p.eps << '|'
     << p.mu << '|' << p.sigma << '|' << p.pec;
  return os.str();
}

ParticleInstance realize(const ParticleSpec& p, const RunConfig& cfg,
                         std::map<std::string, ParticleInstance>& cache) {
  const std::string key = spec_key(p);
  auto it = cache.find(key);
  if (it == cache.end()) {
    ParticleInstance inst;
    if (p.shape == "ball") {
      inst = ball_particle(Vec3::Zero(), p.radius, material_from(p, cfg.ctx, p.radius));
    } else {
      const SurfaceMesh mesh = spec_mesh(p);
      inst = make_particle(mesh, material_from(p, cfg.ctx, mesh.characteristic_a), Vec3::Zero(),
                           cfg.quadrature, cfg.series_order);
    }
    it = cache.emplace(key, std::move(inst)).first;
  }
  ParticleInstance out = it->second;
  out.x = p.center;
  return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void add_metric(RunReport& rep, const std::string& name, double v) {
  rep.metrics.emplace_back(name, v);
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void scene_diagnostics(const Scene& scene, RunReport& rep) {
  if (scene.size() < 2) return;
  rep.regime = scene.regime_report();
  rep.dominance = dominance_bound(scene);
}

void check_strict(const RunConfig& cfg, const RunReport& rep) {
  if (!cfg.solver.strict_dominance || rep.particle_count < 2) return;
  if (!rep.dominance.dominant) {
    std::ostringstream os;
    os << "dominance bound " << rep.dominance.bound << " >= 1 in strict mode";
    throw OutOfRegion(os.str(), -1);
  }
  if (!rep.regime.regime_ok) {
    std::ostringstream os;
    os << "far-zone regime violated in strict mode (ka = " << rep.regime.ka
       << ", limit " << rep.regime.ka_limit << "; kd = " << rep.regime.kd << ", limit "
       << rep.regime.kd_limit << ")";
    throw OutOfRegion(os.str(), -1);
  }
}

LocalFields solve_scene(const Scene& scene, const IncidentField& inc, const RunConfig& cfg,
                        const DominanceReport& dom) {
  if (cfg.route == "direct") return solve_direct(scene, inc, cfg.solver);
  if (cfg.route == "fixed_point") return solve_fixed_point(scene, inc, cfg.solver);
  return dom.dominant ? solve_fixed_point(scene, inc, cfg.solver)
                      : solve_direct(scene, inc, cfg.solver);
}

std::string route_name(SolverRoute r) {
  return r == SolverRoute::fixed_point ? "fixed_point" : "direct";
}

void run_tensors(const RunConfig& cfg, RunReport& rep) {
  rep.route = "series";
  rep.particle_count = static_cast<int>(cfg.particles.size());
  for (std::size_t i = 0; i < cfg.particles.size(); ++i) {
    const ParticleSpec& p = cfg.particles[i];
    const std::string tag = std::to_string(i);
    const std::string alpha_name = "alpha_" + tag + ".csv";
    const std::string beta_name = "beta_" + tag + ".csv";
    if (p.shape == "ball") {
      const ParticleInstance inst =
          ball_particle(Vec3::Zero(), p.radius, material_from(p, cfg.ctx, p.radius));
      const CsvMeta meta = {{"n", "0"}, {"q_hat", "0"}, {"refinement", "0"},
                            {"route", "closed_form_ball"}};
      write_tensor_csv(join_path(cfg.output_dir, alpha_name), inst.alpha, meta);
      write_tensor_csv(join_path(cfg.output_dir, beta_name), inst.beta, meta);
    } else {
      const SurfaceMesh mesh = spec_mesh(p);
      const MaterialContrast m = material_from(p, cfg.ctx, mesh.characteristic_a);
      PolarizabilitySolver solver(mesh, cfg.quadrature);
      const PolarizabilityTensor ta = solver.alpha(m.gamma_eps, cfg.series_order);
      const PolarizabilityTensor tb = solver.beta(m, cfg.series_order);
      write_tensor_csv(join_path(cfg.output_dir, alpha_name), ta.value,
                       {{"n", std::to_string(ta.order)},
                        {"q_hat", format_g17(ta.q_hat)},
                        {"refinement", std::to_string(p.refinement)}});
      write_tensor_csv(join_path(cfg.output_dir, beta_name), tb.value,
                       {{"n", std::to_string(tb.order)},
                        {"q_hat", format_g17(tb.q_hat)},
                        {"refinement", std::to_string(p.refinement)}});
      add_metric(rep, "q_hat_alpha_" + tag, ta.q_hat);
      if (tb.order > 0) add_metric(rep, "q_hat_beta_" + tag, tb.q_hat);
      rep.iterations = std::max(rep.iterations, ta.order);
    }
    rep.outputs.push_back(alpha_name);
    rep.outputs.push_back(beta_name);
  }
}

void run_single(const RunConfig& cfg, RunReport& rep) {
  rep.route = "dipole";
  rep.particle_count = 1;
  std::map<std::string, ParticleInstance> cache;
  const ParticleInstance inst = realize(cfg.particles.at(0), cfg, cache);
  std::vector<Vec3> dirs = cfg.directions;
  if (dirs.empty()) dirs.push_back(Vec3::UnitZ());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const SOperator6 s = s_operator(inst.alpha, inst.beta, dirs[i], cfg.ctx, inst.volume);
    std::ostringstream dtxt;
    dtxt << format_g17(dirs[i].x()) << ' ' << format_g17(dirs[i].y()) << ' '
         << format_g17(dirs[i].z());
    const std::string name = "s_operator_" + std::to_string(i) + ".csv";
    write_tensor_csv(join_path(cfg.output_dir, name), s.matrix,
                     {{"direction", dtxt.str()}, {"prefactor", format_g17(s.prefactor)}});
    rep.outputs.push_back(name);
  }
  add_metric(rep, "volume", inst.volume);
  add_metric(rep, "ka", cfg.ctx.k * inst.a);
}

void run_nbody(const RunConfig& cfg, RunReport& rep) {
  const Scene scene = build_scene(cfg);
  rep.particle_count = scene.size();
  scene_diagnostics(scene, rep);
  check_strict(cfg, rep);
  const IncidentField inc = incident_from(cfg);

  LocalFields lf;
  lf.v.assign(scene.size(), Vec6c::Zero());
  if (scene.size() > 0) {
    lf = solve_scene(scene, inc, cfg, rep.dominance);
    rep.route = route_name(lf.route);
    rep.iterations = lf.iterations;
    rep.residual = lf.residual;
    rep.rate = lf.rate;
    if (lf.rerouted)
      rep.notes.push_back("fixed-point route fell back to direct: interaction matrix not dominant");

    Eigen::MatrixXcd table(scene.size(), 6);
    for (int j = 0; j < scene.size(); ++j) table.row(j) = lf.v[j].transpose();
    write_tensor_csv(join_path(cfg.output_dir, "local_fields.csv"), table,
                     {{"columns", "E1 E2 E3 H1 H2 H3"}, {"route", rep.route}});
    rep.outputs.push_back("local_fields.csv");
  }

  if (cfg.grid) {
    const GridSpec& g = *cfg.grid;
    const FieldGrid fg =
        field_grid(g.lo, g.hi, g.nx, g.ny, g.nz, lf, scene, inc, g.guard_margin);
    write_field_csv(join_path(cfg.output_dir, "field.csv"), fg);
    rep.outputs.push_back("field.csv");
    const long masked =
        std::count(fg.mask.begin(), fg.mask.end(), static_cast<std::uint8_t>(0));
    add_metric(rep, "grid_points", static_cast<double>(fg.values.size()));
    add_metric(rep, "grid_points_masked", static_cast<double>(masked));
  }
}

ParticleTemplate template_from(const ParticleSpec& p, const RunConfig& cfg) {
  if (p.shape == "ball") return ball_template(p.radius, material_from(p, cfg.ctx, p.radius));
  const SurfaceMesh mesh = spec_mesh(p);
  return mesh_template(mesh, material_from(p, cfg.ctx, mesh.characteristic_a), cfg.quadrature,
                       cfg.series_order);
}

PotentialQ build_potential(const RunConfig& cfg, const MediumSpec& ms) {
  switch (ms.source) {
    case MediumSpec::Source::scalar:
      return scalar_potential(ms.grid, std::vector<cdouble>(ms.grid.count(), ms.q), cfg.ctx);
    case MediumSpec::Source::scalar_csv: {
      const std::vector<double> vals = read_voxel_values_csv(ms.csv, ms.grid);
      return scalar_potential(ms.grid, std::vector<cdouble>(vals.begin(), vals.end()), cfg.ctx);
    }
    case MediumSpec::Source::density:
    case MediumSpec::Source::density_csv: {
      DensityField df;
      df.grid = ms.grid;
      df.density = ms.source == MediumSpec::Source::density
                       ? std::vector<double>(ms.grid.count(), ms.density)
                       : read_voxel_values_csv(ms.csv, ms.grid);
      df.templates.push_back(template_from(cfg.particles.at(0), cfg));
      return q_from_density(df, cfg.ctx, ms.direction_level);
    }
  }
  throw InvalidConfiguration("unknown medium source");
}

std::string regime_name(LimitDiagnostics::Regime r) {
  switch (r) {
    case LimitDiagnostics::Regime::static_eps: return "static_eps";
    case LimitDiagnostics::Regime::dispersive: return "dispersive";
    case LimitDiagnostics::Regime::vanishing: return "vanishing";
    case LimitDiagnostics::Regime::resonant: return "resonant";
  }
  return "unknown";
}

void limit_metrics(const MediumSpec& ms, double eps0, RunReport& rep) {
  const LimitDiagnostics ld = limit_diagnostics(ms.limit_eps, eps0, ms.limit_sigma,
                                                ms.limit_omega, ms.limit_a_over_d, ms.limit_kappa);
  add_metric(rep, "limit_w_re", ld.w.real());
  add_metric(rep, "limit_w_im", ld.w.imag());
  add_metric(rep, "limit_kappa_implied_re", ld.kappa_implied.real());
  add_metric(rep, "limit_kappa_implied_im", ld.kappa_implied.imag());
  rep.notes.push_back("limit regime: " + regime_name(ld.regime));
}

void run_medium(const RunConfig& cfg, RunReport& rep) {
  const MediumSpec& ms = *cfg.medium;
  const PotentialQ q = build_potential(cfg, ms);
  const IncidentField inc = incident_from(cfg);
  const EffectiveField ef = solve_effective_field(q, inc, ms.solver);
  rep.route = route_name(ef.route);
  rep.iterations = ef.iterations;
  rep.residual = ef.residual;
  add_metric(rep, "kernel_norm_estimate", ef.kernel_norm_estimate);
  int support = 0;
  for (int v = 0; v < q.grid.count(); ++v)
    if (q.nonzero(v)) ++support;
  add_metric(rep, "support_voxels", static_cast<double>(support));

  write_voxel_csv(join_path(cfg.output_dir, "field_voxels.csv"), ef.grid, ef.u);
  write_voxel_sidecar(join_path(cfg.output_dir, "field_voxels.json"), ef.grid, cfg.ctx.k);
  rep.outputs.push_back("field_voxels.csv");
  rep.outputs.push_back("field_voxels.json");

  if (ms.has_limit) limit_metrics(ms, cfg.ctx.eps0, rep);
}

void run_nearfield(const RunConfig& cfg, RunReport& rep) {
  const NearfieldSpec& ns = *cfg.nearfield;
  const Scene scene = build_scene(cfg);
  rep.particle_count = scene.size();
  scene_diagnostics(scene, rep);
  check_strict(cfg, rep);
  const IncidentField inc = incident_from(cfg);

  IncidentField exc = inc;
  rep.route = "collocation";
  if (scene.size() >= 2) {
    const LocalFields lf = solve_scene(scene, inc, cfg, rep.dominance);
    if (lf.rerouted)
      rep.notes.push_back("fixed-point route fell back to direct: interaction matrix not dominant");
    exc = particle_excitation(ns.particle, lf, scene, inc);
    rep.route = route_name(lf.route) + "+collocation";
  }

  const ParticleSpec& pspec = cfg.lattice ? cfg.particles.at(0) : cfg.particles.at(ns.particle);
  if (pspec.shape == "ball")
    throw InvalidConfiguration(
        "nearfield needs a meshed particle; shape 'ball' has no surface panels");
  const Vec3 position = scene.particles.at(ns.particle).x;
  const SurfacePanels panels(spec_mesh(pspec).translated(position));
  const CurrentSolution cur = solve_surface_current(panels, exc, cfg.ctx, ns.options);
  rep.iterations = cur.iterations;
  rep.residual = cur.residual;
  add_metric(rep, "panels", static_cast<double>(panels.count()));
  add_metric(rep, "condition_estimate", cur.condition_estimate);
  add_metric(rep, "tangential_defect", cur.tangential_defect);

  write_currents_csv(join_path(cfg.output_dir, "currents.csv"), panels, cur);
  rep.outputs.push_back("currents.csv");

  if (!ns.probes.empty()) {
    std::vector<Vec6c> vals;
    vals.reserve(ns.probes.size());
    for (const Vec3& x : ns.probes) vals.push_back(near_field(x, panels, cur, exc, cfg.ctx));
    write_probes_csv(join_path(cfg.output_dir, "probes.csv"), ns.probes, vals);
    rep.outputs.push_back("probes.csv");
  }

  if (ns.residual_check)
    add_metric(rep, "tangential_residual", tangential_residual(panels, cur, exc, cfg.ctx));
}

int mesh_panel_count(const ParticleSpec& p) {
  if (p.shape == "ball") return 0;
  return spec_mesh(p).panel_count();
}

void validate_memory(const RunConfig& cfg, RunReport& rep) {
  const double c16 = 16.0;  // bytes per complex double
  if (cfg.mode == "tensors" || cfg.mode == "single") {
    double bytes = 0.0;
    for (const ParticleSpec& p : cfg.particles) {
      const int np = mesh_panel_count(p);
      bytes += 3.0 * double(np) * double(np) * 8.0;  // three dense real panel operators
    }
    add_metric(rep, "panel_operator_bytes", bytes);
  } else if (cfg.mode == "nbody") {
    const double n = rep.particle_count;
    add_metric(rep, "direct_matrix_bytes", 36.0 * n * n * c16);
    if (cfg.grid)
      add_metric(rep, "grid_bytes",
                 6.0 * c16 * double(cfg.grid->nx) * double(cfg.grid->ny) * double(cfg.grid->nz));
  } else if (cfg.mode == "medium") {
    const VoxelGrid& g = cfg.medium->grid;
    const double blocks = double(2 * g.nx - 1) * double(2 * g.ny - 1) * double(2 * g.nz - 1);
    add_metric(rep, "kernel_cache_bytes", blocks * 36.0 * c16);
    add_metric(rep, "field_bytes", 6.0 * c16 * double(g.count()));
  } else if (cfg.mode == "nearfield") {
    const ParticleSpec& p =
        cfg.lattice ? cfg.particles.at(0) : cfg.particles.at(cfg.nearfield->particle);
    const double np = mesh_panel_count(p);
    add_metric(rep, "collocation_matrix_bytes", 4.0 * np * np * c16);
  }
}

}  // namespace

std::vector<Vec3> lattice_positions(int count, double spacing, double jitter, unsigned seed) {
  if (count < 1) throw InvalidConfiguration("lattice count must be at least 1");
  if (spacing <= 0.0) throw InvalidConfiguration("lattice spacing must be positive");
  int n = 1;
  while (n * n * n < count) ++n;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec3> out;
  out.reserve(count);
  const double off = 0.5 * (n - 1);
  for (int iz = 0; iz < n; ++iz)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        if (static_cast<int>(out.size()) == count) return out;
        Vec3 p = spacing * Vec3(ix - off, iy - off, iz - off);
        if (jitter > 0.0) p += jitter * spacing * Vec3(u(rng), u(rng), u(rng));
        out.push_back(p);
      }
  return out;
}

Scene build_scene(const RunConfig& cfg) {
  Scene scene;
  scene.ctx = cfg.ctx;
  std::map<std::string, ParticleInstance> cache;
  if (cfg.lattice) {
    const LatticeSpec& lat = *cfg.lattice;
    const ParticleInstance base = realize(cfg.particles.at(0), cfg, cache);
    const std::vector<Vec3> pos =
        lattice_positions(lat.count, lat.spacing, lat.jitter, lat.seed);
    scene.particles.reserve(pos.size());
    for (const Vec3& x : pos) {
      ParticleInstance inst = base;
      inst.x = x;
      scene.particles.push_back(std::move(inst));
    }
  } else {
    scene.particles.reserve(cfg.particles.size());
    for (const ParticleSpec& p : cfg.particles)
      scene.particles.push_back(realize(p, cfg, cache));
  }
  return scene;
}

IncidentField incident_from(const RunConfig& cfg) {
  if (!cfg.has_incident) return IncidentField::zero();
  return IncidentField::plane_wave(cfg.incident_direction, cfg.incident_E0, cfg.ctx);
}

RunReport run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.output_dir);
  RunReport rep;
  rep.mode = cfg.mode;
  if (cfg.mode == "tensors")
    run_tensors(cfg, rep);
  else if (cfg.mode == "single")
    run_single(cfg, rep);
  else if (cfg.mode == "nbody")
    run_nbody(cfg, rep);
  else if (cfg.mode == "medium")
    run_medium(cfg, rep);
  else if (cfg.mode == "nearfield")
    run_nearfield(cfg, rep);
  else
    throw InvalidConfiguration("unknown mode '" + cfg.mode + "'");
  write_report_json(join_path(cfg.output_dir, "report.json"), rep);
  rep.outputs.push_back("report.json");
  rep.seconds = elapsed_since(t0);
  return rep;
}

RunReport validate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.mode = cfg.mode;
  rep.route = "validate";

  if (cfg.mode == "nbody" || cfg.mode == "nearfield") {
    const Scene scene = build_scene(cfg);
    rep.particle_count = scene.size();
    scene_diagnostics(scene, rep);
    if (scene.size() >= 2) {
      add_metric(rep, "ka", rep.regime.ka);
      add_metric(rep, "kd", rep.regime.kd);
      add_metric(rep, "a_over_d", rep.regime.ka / rep.regime.kd);
      add_metric(rep, "dominance_bound", rep.dominance.bound);
      add_metric(rep, "dominance_bound_crude", rep.dominance.bound_crude);
      if (!rep.regime.regime_ok)
        rep.notes.push_back("far-zone regime violated: ka or kd outside its limit");
      if (!rep.dominance.dominant)
        rep.notes.push_back("interaction matrix not dominant: fixed point may diverge");
    } else if (scene.size() == 1) {
      add_metric(rep, "ka", cfg.ctx.k * scene.particles[0].a);
    }
  } else if (cfg.mode == "tensors" || cfg.mode == "single") {
    rep.particle_count = static_cast<int>(cfg.particles.size());
    for (std::size_t i = 0; i < cfg.particles.size(); ++i)
      add_metric(rep, "panels_" + std::to_string(i),
                 static_cast<double>(mesh_panel_count(cfg.particles[i])));
  } else if (cfg.mode == "medium") {
    const MediumSpec& ms = *cfg.medium;
    add_metric(rep, "voxels", static_cast<double>(ms.grid.count()));
    add_metric(rep, "voxel_ka", cfg.ctx.k * ms.grid.h);
    if (ms.has_limit) limit_metrics(ms, cfg.ctx.eps0, rep);
  }

  validate_memory(cfg, rep);
  rep.seconds = elapsed_since(t0);
  return rep;
}

void write_report_json(const std::string& path, const RunReport& rep) {
  nlohmann::json j;
  j["mode"] = rep.mode;
  j["route"] = rep.route;
  j["particle_count"] = rep.particle_count;
  j["iterations"] = rep.iterations;
  j["residual"] = rep.residual;
  j["rate"] = rep.rate;
  j["regime"] = {{"regime_ok", rep.regime.regime_ok}, {"ka", rep.regime.ka},
                 {"kd", rep.regime.kd},               {"ka_limit", rep.regime.ka_limit},
                 {"kd_limit", rep.regime.kd_limit},   {"g_error", rep.regime.g_error},
                 {"grad_error", rep.regime.grad_error}};
  j["dominance"] = {{"bound", rep.dominance.bound},
                    {"bound_crude", rep.dominance.bound_crude},
                    {"dominant", rep.dominance.dominant}};
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [key, value] : rep.metrics) m[key] = value;
  j["metrics"] = m;
  j["notes"] = rep.notes;
  j["outputs"] = rep.outputs;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << j.dump(2) << '\n';
}

void print_report(std::ostream& os, const RunReport& rep) {
  os << "mode: " << rep.mode << "   route: " << rep.route
     << "   particles: " << rep.particle_count << '\n';
  if (rep.iterations > 0 || rep.residual > 0.0) {
    os << "iterations: " << rep.iterations << "   residual: " << rep.residual;
    if (rep.rate > 0.0) os << "   rate: " << rep.rate;
    os << '\n';
  }
  if (rep.regime.kd > 0.0) {
    os << "regime: " << (rep.regime.regime_ok ? "ok" : "violated") << " (ka = " << rep.regime.ka
       << ", limit " << rep.regime.ka_limit << "; kd = " << rep.regime.kd << ", limit "
       << rep.regime.kd_limit << ")\n";
    os << "dominance bound: " << rep.dominance.bound << " (crude " << rep.dominance.bound_crude
       << ", " << (rep.dominance.dominant ? "dominant" : "not dominant") << ")\n";
  }
  for (const auto& [key, value] : rep.metrics) os << "  " << key << " = " << value << '\n';
  for (const std::string& n : rep.notes) os << "note: " << n << '\n';
  if (!rep.outputs.empty()) {
    os << "wrote:";
    for (const std::string& f : rep.outputs) os << ' ' << f;
    os << '\n';
  }
  os << "elapsed: " << rep.seconds << " s\n";
}

}  // namespace smallscat
