#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "smallscat/errors.hpp"
#include "smallscat/run.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out;
  int threads = 0;
  long long seed = -1;
  bool strict = false;
};

int dispatch(const Options& o, bool do_run) {
#ifdef _OPENMP
  if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
  smallscat::RunConfig cfg = smallscat::load_config(o.config_path);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed >= 0) {
    cfg.seed = static_cast<unsigned>(o.seed);
    if (cfg.lattice) cfg.lattice->seed = static_cast<unsigned>(o.seed);
  }
  if (o.strict) cfg.solver.strict_dominance = true;
  const smallscat::RunReport rep = do_run ? smallscat::run(cfg) : smallscat::validate(cfg);
  smallscat::print_report(std::cout, rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"small-particle electromagnetic scattering workbench"};
  app.require_subcommand(1);

  Options o;
  const auto add_common = [&o](CLI::App* sub) {
    sub->add_option("config", o.config_path, "scene file (JSON)")->required();
    sub->add_option("--out", o.out, "output directory, overrides the config");
    sub->add_option("--threads", o.threads, "OpenMP thread count");
    sub->add_option("--seed", o.seed, "overrides the config seed and the lattice jitter seed");
    sub->add_flag("--strict-dominance", o.strict,
                  "fail instead of rerouting when the scene leaves the convergence regime");
  };
  CLI::App* run_cmd = app.add_subcommand("run", "solve the scene and write its artifacts");
  CLI::App* val_cmd =
      app.add_subcommand("validate", "print scene diagnostics without solving or writing");
  add_common(run_cmd);
  add_common(val_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(o, run_cmd->parsed());
  } catch (const smallscat::OutOfRegion& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const smallscat::NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const smallscat::NearEigenvalue& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const smallscat::InvalidConfiguration& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const smallscat::TopologyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
