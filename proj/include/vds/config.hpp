#pragma once

/*
 * Declarative experiment configs for the CLI.
 *
 * A config is a single JSON object:
 *
 *   {
 *     "kind":      "structure-audit" | "flow" | "kinetic" | "particles"
 *                  | "convergence",           (required)
 *     "builtin":   catalog name,              (required)
 *     "seed":      unsigned integer,          (required for particles and
 *                                              convergence, defaulted
 *                                              otherwise)
 *     "tol_scale": positive number,           (optional, default 1)
 *     "threads":   integer >= 1,              (optional, default 1)
 *     "out":       output directory,          (optional; CLI flag and
 *                                              environment override)
 *     "params":    kind-specific object       (optional; defaults from the
 *                                              builtin)
 *   }
 *
 * Parsing validates every key and reports violations as ConfigError with a
 * JSON-pointer key path ("/params/dt").  Unknown keys are errors.  The
 * normalized config fills in every default, so the effective experiment is
 * fully explicit and hashable.
 *
 * Any builtin that is backed by a structure bundle (all structure-audit and
 * flow entries, and the kinetic wraps) may also be run with kind
 * "structure-audit", which audits the bundle and skips the rest.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vds/errors.hpp"
#include "vds/numerics.hpp"

namespace vds {

enum class ExperimentKind { StructureAudit, Flow, Kinetic, Particles, Convergence };

const char* experiment_kind_name(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind kind{ExperimentKind::StructureAudit};
  std::string builtin;
  std::uint64_t seed{0};
  real tol_scale{1.0};
  int threads{1};
  std::string out_dir;            // empty = caller decides
  nlohmann::ordered_json params;  // normalized: every kind parameter present

  // The canonical result-determining content: kind, builtin, seed, tol_scale,
  // params — with a fixed key order.  Excludes out_dir and threads, which
  // cannot change any computed number.
  nlohmann::ordered_json experiment_object() const;
};

struct BuiltinInfo {
  std::string name;
  ExperimentKind kind;
  std::string summary;
  bool has_bundle{false};  // may also run as a plain structure audit
};

// The catalog, in stable listing order.
const std::vector<BuiltinInfo>& builtin_catalog();

// Complete runnable default config for a catalog entry; throws ConfigError
// ("/builtin") for unknown names.
nlohmann::ordered_json default_config(const std::string& builtin);

// Validate and normalize a raw config object.  Throws ConfigError with the
// offending key path on any violation.
ExperimentConfig parse_config(const nlohmann::json& raw);

// Read + parse a config file; file and JSON errors surface as ConfigError.
ExperimentConfig load_config_file(const std::string& path);

// The machine-readable description of the config contract printed by the
// `schema` verb: top-level keys, per-kind parameter tables, and the catalog.
nlohmann::ordered_json config_schema();

}  // namespace vds
