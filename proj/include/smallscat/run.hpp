#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "smallscat/config.hpp"

namespace smallscat {

struct RunReport {
  std::string mode;
  std::string route = "none";
  int particle_count = 0;
  int iterations = 0;
  double residual = 0.0;
  double rate = 0.0;
  FarZoneReport regime;
  DominanceReport dominance;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> notes;
  std::vector<std::string> outputs;  // files written, relative to the output dir
  double seconds = 0.0;              // printed only, never serialized
};

// Centered cubic lattice of `count` sites, optionally jittered by a uniform
// fraction of the spacing per axis.  Deterministic in the seed.
std::vector<Vec3> lattice_positions(int count, double spacing, double jitter,
                                    unsigned seed);

// Realizes the particle list (template replication included).  Tensor series
// run once per distinct particle description.
Scene build_scene(const RunConfig& cfg);

IncidentField incident_from(const RunConfig& cfg);

// Executes the configured mode and writes its artifacts plus report.json into
// cfg.output_dir.
RunReport run(const RunConfig& cfg);

// Diagnostics without outputs: regime margins, dominance bound, memory needs.
RunReport validate(const RunConfig& cfg);

void write_report_json(const std::string& path, const RunReport& rep);
void print_report(std::ostream& os, const RunReport& rep);

}  // namespace smallscat
