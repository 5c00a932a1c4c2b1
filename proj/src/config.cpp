#include "vds/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vds {

using nlohmann::json;
using nlohmann::ordered_json;

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::StructureAudit: return "structure-audit";
    case ExperimentKind::Flow: return "flow";
    case ExperimentKind::Kinetic: return "kinetic";
    case ExperimentKind::Particles: return "particles";
    default: return "convergence";
  }
}

namespace {

struct BuiltinSpec {
  const char* name;
  ExperimentKind kind;
  const char* summary;
  bool has_bundle;
  std::uint64_t default_seed;
  int audit_samples;  // default sample count when running a structure audit
  int flow_dim;       // expected z0 length for flow entries, else 0
};

const BuiltinSpec kBuiltins[] = {
    {"quadratic-1d", ExperimentKind::StructureAudit,
     "1-D gradient flow with quadratic entropy and dissipation; every identity has a "
     "closed form",
     true, 1, 256, 0},
    {"cosh-1d", ExperimentKind::StructureAudit,
     "1-D gradient flow with cosh dissipation; exercises the non-quadratic conjugacy "
     "pair",
     true, 1, 256, 0},
    {"rotation", ExperimentKind::StructureAudit,
     "planar rotation with quadratic entropy: conservative drift exactly orthogonal to "
     "dS",
     true, 1, 256, 0},
    {"hat-rotation", ExperimentKind::StructureAudit,
     "antisymmetric-operator extension of the rotation bundle (operator and Jacobi "
     "checks)",
     true, 1, 256, 0},
    {"interp-rotation-half", ExperimentKind::StructureAudit,
     "midpoint interpolant between the rotation bundle and its operator extension", true,
     1, 256, 0},
    {"damped-oscillator-base", ExperimentKind::StructureAudit,
     "damped harmonic oscillator as a dissipative drift bundle (states q, p)", true, 1,
     256, 0},
    {"damped-oscillator", ExperimentKind::Flow,
     "damped oscillator with an energy bookkeeping coordinate: conserves E, dissipates "
     "S = -e",
     true, 1, 256, 3},
    {"bar-damped-oscillator", ExperimentKind::Flow,
     "energy-balancing extension of the oscillator base; audited and integrated", true,
     1, 256, 3},
    {"andersen-kinetic", ExperimentKind::Kinetic,
     "phase-space jump-thermostat model: identity checks plus entropy-monotone "
     "evolution",
     true, 1, 8, 0},
    {"vfp-kinetic", ExperimentKind::Kinetic,
     "phase-space friction-diffusion model: identity checks plus entropy-monotone "
     "evolution",
     true, 1, 8, 0},
    {"bar-andersen-kinetic", ExperimentKind::StructureAudit,
     "energy-balancing extension of the jump-thermostat wrap, audited at the grid "
     "tolerance",
     true, 1, 8, 0},
    {"bar-vfp-kinetic", ExperimentKind::StructureAudit,
     "energy-balancing extension of the friction-diffusion wrap, audited at the grid "
     "tolerance",
     true, 1, 8, 0},
    {"andersen-particles", ExperimentKind::Particles,
     "jump-thermostat particle ensemble: thermal marginals and the empirical Gibbs "
     "distance",
     false, 7, 0, 0},
    {"langevin-particles", ExperimentKind::Particles,
     "friction-diffusion particle ensemble: thermal marginals and the empirical Gibbs "
     "distance",
     false, 7, 0, 0},
    {"andersen-convergence", ExperimentKind::Convergence,
     "empirical laws vs the evolved grid density across particle counts (jump "
     "mechanism)",
     false, 500, 0, 0},
    {"vfp-convergence", ExperimentKind::Convergence,
     "empirical laws vs the evolved grid density across particle counts (diffusion "
     "mechanism)",
     false, 500, 0, 0},
};

const BuiltinSpec* find_builtin(const std::string& name) {
  for (const BuiltinSpec& b : kBuiltins)
    if (name == b.name) return &b;
  return nullptr;
}

bool parse_kind(const std::string& s, ExperimentKind& out) {
  for (ExperimentKind k :
       {ExperimentKind::StructureAudit, ExperimentKind::Flow, ExperimentKind::Kinetic,
        ExperimentKind::Particles, ExperimentKind::Convergence})
    if (s == experiment_kind_name(k)) {
      out = k;
      return true;
    }
  return false;
}

// Default parameter object for (kind, builtin); the effective kind may be
// structure-audit even when the builtin's native kind is richer.
ordered_json default_params(ExperimentKind kind, const BuiltinSpec& spec) {
  ordered_json p;
  switch (kind) {
    case ExperimentKind::StructureAudit: p["samples"] = spec.audit_samples; break;
    case ExperimentKind::Flow:
      p["samples"] = spec.audit_samples;
      p["T"] = 10.0;
      p["dt"] = 1e-3;
      p["z0"] = std::vector<real>(static_cast<std::size_t>(spec.flow_dim), 0.0);
      p["z0"][0] = 1.0;
      break;
    case ExperimentKind::Kinetic:
      p["grid"] = 64;
      p["T"] = 0.5;
      p["dt"] = 0.005;
      p["samples"] = spec.audit_samples;
      p["identity_residuals"] = true;
      break;
    case ExperimentKind::Particles:
      p["n"] = 10000;
      p["T"] = 2.0;
      p["dt"] = 0.005;
      p["m"] = 1.0;
      p["gamma"] = 1.0;
      break;
    case ExperimentKind::Convergence:
      p["counts"] = std::vector<long>{2000, 20000};
      p["seeds"] = 3;
      p["T"] = 2.0;
      p["dt"] = 0.01;
      break;
  }
  return p;
}

real take_positive_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const real v = j.get<real>();
  if (!std::isfinite(v) || v <= 0.0) throw ConfigError(path, "expected a positive finite number");
  return v;
}

real take_nonnegative_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const real v = j.get<real>();
  if (!std::isfinite(v) || v < 0.0)
    throw ConfigError(path, "expected a nonnegative finite number");
  return v;
}

long take_positive_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  const long v = j.get<long>();
  if (v < 1) throw ConfigError(path, "expected an integer >= 1");
  return v;
}

// Validate one user-supplied parameter against the kind schema and write the
// normalized value into `out` (which already holds the defaults).
void apply_param(ExperimentKind kind, const std::string& key, const json& val,
                 const std::string& path, int flow_dim, ordered_json& out) {
  switch (kind) {
    case ExperimentKind::StructureAudit:
      if (key == "samples") {
        out["samples"] = take_positive_integer(val, path);
        return;
      }
      break;
    case ExperimentKind::Flow:
      if (key == "samples") {
        out["samples"] = take_positive_integer(val, path);
        return;
      }
      if (key == "T") {
        out["T"] = take_positive_number(val, path);
        return;
      }
      if (key == "dt") {
        out["dt"] = take_positive_number(val, path);
        return;
      }
      if (key == "z0") {
        if (!val.is_array() || static_cast<int>(val.size()) != flow_dim) {
          std::ostringstream os;
          os << "expected an array of " << flow_dim << " numbers";
          throw ConfigError(path, os.str());
        }
        std::vector<real> z0;
        for (std::size_t i = 0; i < val.size(); ++i) {
          if (!val[i].is_number() || !std::isfinite(val[i].get<real>()))
            throw ConfigError(path + "/" + std::to_string(i), "expected a finite number");
          z0.push_back(val[i].get<real>());
        }
        out["z0"] = z0;
        return;
      }
      break;
    case ExperimentKind::Kinetic:
      if (key == "grid") {
        const long g = take_positive_integer(val, path);
        if (g < 8 || g > 512) throw ConfigError(path, "expected a grid size in [8, 512]");
        out["grid"] = g;
        return;
      }
      if (key == "T") {
        out["T"] = take_positive_number(val, path);
        return;
      }
      if (key == "dt") {
        out["dt"] = take_positive_number(val, path);
        return;
      }
      if (key == "samples") {
        out["samples"] = take_positive_integer(val, path);
        return;
      }
      if (key == "identity_residuals") {
        if (!val.is_boolean()) throw ConfigError(path, "expected a boolean");
        out["identity_residuals"] = val.get<bool>();
        return;
      }
      break;
    case ExperimentKind::Particles:
      if (key == "n") {
        out["n"] = take_positive_integer(val, path);
        return;
      }
      if (key == "T") {
        out["T"] = take_positive_number(val, path);
        return;
      }
      if (key == "dt") {
        out["dt"] = take_positive_number(val, path);
        return;
      }
      if (key == "m") {
        out["m"] = take_positive_number(val, path);
        return;
      }
      if (key == "gamma") {
        out["gamma"] = take_nonnegative_number(val, path);
        return;
      }
      break;
    case ExperimentKind::Convergence:
      if (key == "counts") {
        if (!val.is_array() || val.empty())
          throw ConfigError(path, "expected a nonempty array of particle counts");
        std::vector<long> counts;
        for (std::size_t i = 0; i < val.size(); ++i) {
          const long c = take_positive_integer(val[i], path + "/" + std::to_string(i));
          if (!counts.empty() && c <= counts.back())
            throw ConfigError(path + "/" + std::to_string(i),
                              "particle counts must be strictly increasing");
          counts.push_back(c);
        }
        out["counts"] = counts;
        return;
      }
      if (key == "seeds") {
        out["seeds"] = take_positive_integer(val, path);
        return;
      }
      if (key == "T") {
        out["T"] = take_positive_number(val, path);
        return;
      }
      if (key == "dt") {
        out["dt"] = take_positive_number(val, path);
        return;
      }
      break;
  }
  std::ostringstream os;
  os << "unknown parameter for kind '" << experiment_kind_name(kind) << "'";
  throw ConfigError(path, os.str());
}

}  // namespace

ordered_json ExperimentConfig::experiment_object() const {
  ordered_json e;
  e["kind"] = experiment_kind_name(kind);
  e["builtin"] = builtin;
  e["seed"] = seed;
  e["tol_scale"] = tol_scale;
  e["params"] = params;
  return e;
}

const std::vector<BuiltinInfo>& builtin_catalog() {
  static const std::vector<BuiltinInfo> catalog = [] {
    std::vector<BuiltinInfo> v;
    for (const BuiltinSpec& b : kBuiltins)
      v.push_back({b.name, b.kind, b.summary, b.has_bundle});
    return v;
  }();
  return catalog;
}

ordered_json default_config(const std::string& builtin) {
  const BuiltinSpec* spec = find_builtin(builtin);
  if (!spec) throw ConfigError("/builtin", "unknown builtin '" + builtin + "'");
  ordered_json cfg;
  cfg["kind"] = experiment_kind_name(spec->kind);
  cfg["builtin"] = spec->name;
  cfg["seed"] = spec->default_seed;
  cfg["tol_scale"] = 1.0;
  cfg["params"] = default_params(spec->kind, *spec);
  return cfg;
}

ExperimentConfig parse_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("/", "config must be a JSON object");

  static const char* kAllowed[] = {"kind", "builtin", "seed",   "tol_scale",
                                   "threads", "out",  "params"};
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    const std::string& key = it.key();
    if (std::find_if(std::begin(kAllowed), std::end(kAllowed),
                     [&](const char* a) { return key == a; }) == std::end(kAllowed))
      throw ConfigError("/" + key, "unknown key");
  }

  if (!raw.contains("kind")) throw ConfigError("/kind", "required key missing");
  if (!raw["kind"].is_string()) throw ConfigError("/kind", "expected a string");
  ExperimentKind kind;
  if (!parse_kind(raw["kind"].get<std::string>(), kind))
    throw ConfigError("/kind",
                      "unknown experiment kind '" + raw["kind"].get<std::string>() +
                          "' (expected structure-audit, flow, kinetic, particles, or "
                          "convergence)");

  if (!raw.contains("builtin")) throw ConfigError("/builtin", "required key missing");
  if (!raw["builtin"].is_string()) throw ConfigError("/builtin", "expected a string");
  const std::string name = raw["builtin"].get<std::string>();
  const BuiltinSpec* spec = find_builtin(name);
  if (!spec)
    throw ConfigError("/builtin", "unknown builtin '" + name + "' (see `vds list`)");

  if (kind != spec->kind && !(kind == ExperimentKind::StructureAudit && spec->has_bundle)) {
    std::ostringstream os;
    os << "builtin '" << name << "' runs as '" << experiment_kind_name(spec->kind) << "'";
    if (spec->has_bundle && spec->kind != ExperimentKind::StructureAudit)
      os << " (or as 'structure-audit')";
    throw ConfigError("/kind", os.str());
  }

  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.builtin = name;

  if (raw.contains("seed")) {
    const json& s = raw["seed"];
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                   s.get<long long>() < 0))
      throw ConfigError("/seed", "expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  } else if (kind == ExperimentKind::Particles || kind == ExperimentKind::Convergence) {
    throw ConfigError("/seed", "required for stochastic experiment kinds");
  } else {
    cfg.seed = spec->default_seed;
  }

  cfg.tol_scale = raw.contains("tol_scale")
                      ? take_positive_number(raw["tol_scale"], "/tol_scale")
                      : 1.0;
  if (raw.contains("threads"))
    cfg.threads = static_cast<int>(take_positive_integer(raw["threads"], "/threads"));
  if (raw.contains("out")) {
    if (!raw["out"].is_string()) throw ConfigError("/out", "expected a string");
    cfg.out_dir = raw["out"].get<std::string>();
  }

  cfg.params = default_params(kind, *spec);
  if (raw.contains("params")) {
    if (!raw["params"].is_object()) throw ConfigError("/params", "expected an object");
    for (auto it = raw["params"].begin(); it != raw["params"].end(); ++it)
      apply_param(kind, it.key(), it.value(), "/params/" + it.key(), spec->flow_dim,
                  cfg.params);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config file " + path);
  json raw;
  try {
    in >> raw;
  } catch (const json::exception& e) {
    throw ConfigError("/", std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(raw);
}

ordered_json config_schema() {
  ordered_json s;
  s["config"] = {
      {"kind",
       "one of structure-audit | flow | kinetic | particles | convergence (required)"},
      {"builtin", "catalog name (required; see `vds list`)"},
      {"seed",
       "nonnegative integer; required for particles and convergence, defaulted "
       "otherwise"},
      {"tol_scale", "positive number multiplying every check tolerance (default 1)"},
      {"threads", "integer >= 1 (default 1)"},
      {"out", "output directory (overridden by --out and VDS_OUT)"},
      {"params", "kind-specific object; omitted entries use the builtin defaults"},
  };
  s["params"] = ordered_json::object();
  s["params"]["structure-audit"] = {
      {"samples", "integer >= 1: deterministic sample points per identity check"}};
  s["params"]["flow"] = {
      {"samples", "integer >= 1: audit sample points"},
      {"T", "positive number: integration horizon"},
      {"dt", "positive number: fixed step size"},
      {"z0", "array of numbers matching the state dimension: initial state"}};
  s["params"]["kinetic"] = {
      {"grid", "integer in [8, 512]: nodes per phase-space axis"},
      {"T", "positive number: evolution horizon"},
      {"dt", "positive number: step size (refused above the stability bound)"},
      {"samples", "integer >= 1: audit sample points for the structure wrap"},
      {"identity_residuals", "boolean: record the drift-identity residual per step"}};
  s["params"]["particles"] = {
      {"n", "integer >= 1: particle count"},
      {"T", "positive number: evolution horizon"},
      {"dt", "positive number: step size (refused above the stability bound)"},
      {"m", "positive number: particle mass"},
      {"gamma", "nonnegative number: thermostat intensity"}};
  s["params"]["convergence"] = {
      {"counts", "strictly increasing array of integers >= 1: particle counts"},
      {"seeds", "integer >= 1: independent ensembles per count"},
      {"T", "positive number: evolution horizon"},
      {"dt", "positive number: step size"}};
  s["exit_codes"] = {{"0", "every check passed"},
                     {"1", "at least one check failed"},
                     {"2", "config error (message carries the offending key path)"},
                     {"3", "numerical refusal (stability or hypothesis precondition)"},
                     {"4", "internal error"}};
  s["builtins"] = ordered_json::array();
  for (const BuiltinInfo& b : builtin_catalog())
    s["builtins"].push_back({{"name", b.name},
                             {"kind", experiment_kind_name(b.kind)},
                             {"summary", b.summary}});
  return s;
}

}  // namespace vds
