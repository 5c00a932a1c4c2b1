// Experiment execution.
//
// run_experiment maps a validated config onto the library and produces the
// full result in memory: the deterministic report object, the text artifacts
// (trajectory / monitor CSVs, final grid state), and optionally a particle
// ensemble for binary serialization.  Nothing touches the filesystem until
// write_outputs, so a refused step size or a degenerate input aborts the run
// with no partial output directory.
//
// Checks per kind:
//  - structure-audit: the full identity audit of the named bundle;
//  - flow: the audit plus an integrated trajectory with entropy-production,
//    energy-conservation, and variational-residual monitors;
//  - kinetic: grid identity checks (degeneracy, orthogonality, drift
//    identity, equilibrium stationarity), a structure audit of the grid
//    wrap, and an evolution with entropy-monotonicity / mass-conservation /
//    clipping checks;
//  - particles: an equilibrium-started evolution checked against the thermal
//    marginals (Kolmogorov-Smirnov) and the grid equilibrium (binned L1);
//  - convergence: empirical-law vs grid-dynamics L1 distances across
//    particle counts, checked for separated monotone decrease.

#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "vds/bundle.hpp"
#include "vds/config.hpp"
#include "vds/particles.hpp"

namespace vds {

// Construct the bundle behind a catalog entry (structure-audit view).
// Throws ConfigError for names that do not carry a bundle.
Bundle make_builtin_bundle(const std::string& name);

struct RunOutcome {
  nlohmann::ordered_json report;                 // report.json content
  std::map<std::string, std::string> artifacts;  // filename -> text content
  bool has_ensemble{false};
  ParticleEnsemble ensemble;  // saved as ensemble.bin when has_ensemble
  bool all_passed{false};
};

// Execute the experiment fully in memory.
RunOutcome run_experiment(const ExperimentConfig& cfg);

// Create out_dir (recursively) and write report.json, metadata.json, and
// every artifact.  metadata.json carries the environment-dependent values;
// report.json bytes depend only on the experiment object.
void write_outputs(const RunOutcome& out, const ExperimentConfig& cfg,
                   const std::string& out_dir, long elapsed_ms);

}  // namespace vds
