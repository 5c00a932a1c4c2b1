#include "vds/runner.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vds/builtins.hpp"
#include "vds/extension.hpp"
#include "vds/integrate.hpp"
#include "vds/kinetic.hpp"
#include "vds/report.hpp"
#include "vds/structure.hpp"
#include "vds/version.hpp"

namespace vds {

using nlohmann::ordered_json;

namespace {

Mechanism mechanism_for(const std::string& name) {
  return name.find("andersen") != std::string::npos ? Mechanism::Andersen : Mechanism::Vfp;
}

// Rescale every applicable tolerance and refresh the verdicts.
void apply_tol_scale(std::vector<CheckReport>& checks, real scale) {
  if (scale == 1.0) return;
  for (CheckReport& c : checks) {
    if (c.verdict == Verdict::NotApplicable) continue;
    c.tolerance *= scale;
    c.verdict = (c.residual <= c.tolerance) ? Verdict::Pass : Verdict::Fail;
  }
}

ordered_json summarize(const std::vector<CheckReport>& checks) {
  long passed = 0, failed = 0, na = 0;
  for (const CheckReport& c : checks) {
    if (c.verdict == Verdict::Pass) ++passed;
    else if (c.verdict == Verdict::Fail) ++failed;
    else ++na;
  }
  ordered_json s;
  s["checks"] = static_cast<long>(checks.size());
  s["passed"] = passed;
  s["failed"] = failed;
  s["not_applicable"] = na;
  s["all_passed"] = (failed == 0);
  return s;
}

ordered_json report_skeleton(const ExperimentConfig& cfg) {
  ordered_json r;
  r["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  r["config_hash"] = config_hash(cfg);
  r["experiment"] = cfg.experiment_object();
  return r;
}

void finish_report(RunOutcome& out, const ExperimentConfig& cfg,
                   std::vector<CheckReport> checks, ordered_json details) {
  apply_tol_scale(checks, cfg.tol_scale);
  ordered_json arr = ordered_json::array();
  for (const CheckReport& c : checks) arr.push_back(check_to_json(c));
  out.report["checks"] = arr;
  out.report["details"] = std::move(details);
  out.report["summary"] = summarize(checks);
  out.all_passed = out.report["summary"]["all_passed"].get<bool>();
}

std::string csv_number(real v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------- structure

RunOutcome run_structure_audit(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.report = report_skeleton(cfg);
  const Bundle b = make_builtin_bundle(cfg.builtin);
  const int samples = cfg.params.at("samples").get<int>();
  std::vector<CheckReport> checks = structure_audit(b, samples);
  ordered_json details;
  details["bundle"] = b.name;
  details["bundle_kind"] = kind_name(b.kind);
  details["dim"] = b.dim;
  finish_report(out, cfg, std::move(checks), std::move(details));
  return out;
}

// --------------------------------------------------------------------- flow

RunOutcome run_flow(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.report = report_skeleton(cfg);
  const Bundle b = make_builtin_bundle(cfg.builtin);
  const int samples = cfg.params.at("samples").get<int>();
  const real T = cfg.params.at("T").get<real>();
  const real dt = cfg.params.at("dt").get<real>();
  Vec z0(b.dim);
  for (int i = 0; i < b.dim; ++i) z0[i] = cfg.params.at("z0").at(static_cast<std::size_t>(i)).get<real>();

  std::vector<CheckReport> checks = structure_audit(b, samples);
  const Trajectory traj = integrate(b, z0, T, dt);
  if (traj.aborted)
    throw NumericalRefusal("integration aborted: " + traj.abort_reason);
  checks.push_back(monitor_lyapunov(traj));
  checks.push_back(monitor_energy(b, traj));
  checks.push_back(monitor_residual(b, traj));

  std::ostringstream csv;
  write_trajectory_csv(traj, csv);
  out.artifacts["trajectory.csv"] = csv.str();

  ordered_json details;
  details["bundle"] = b.name;
  details["bundle_kind"] = kind_name(b.kind);
  details["dim"] = b.dim;
  details["steps"] = traj.steps();
  details["dt"] = traj.dt;
  std::vector<real> zf(traj.states.back().data(),
                       traj.states.back().data() + traj.states.back().size());
  details["final_state"] = zf;
  details["final_S"] = traj.S_vals.back();
  if (!traj.E_vals.empty()) details["final_E"] = traj.E_vals.back();
  finish_report(out, cfg, std::move(checks), std::move(details));
  return out;
}

// ------------------------------------------------------------------ kinetic

RunOutcome run_kinetic_experiment(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.report = report_skeleton(cfg);
  const int grid = cfg.params.at("grid").get<int>();
  const real T = cfg.params.at("T").get<real>();
  const real dt = cfg.params.at("dt").get<real>();
  const int samples = cfg.params.at("samples").get<int>();
  const bool with_residuals = cfg.params.at("identity_residuals").get<bool>();

  const KineticBundle kb = make_kinetic_bundle(mechanism_for(cfg.builtin), grid, grid);
  const GridDensity rho0 = sample_smooth_density(kb, cfg.seed);

  std::vector<CheckReport> checks;
  checks.push_back(check_poisson_degeneracy(kb, rho0));
  checks.push_back(check_transport_orthogonality(kb, rho0));
  checks.push_back(verify_drift_identity(kb, rho0));
  checks.push_back(check_gibbs_stationarity(kb, dt));
  for (CheckReport& c : structure_audit(make_kinetic_structure_bundle(kb), samples))
    checks.push_back(std::move(c));

  const long steps = std::lround(T / dt);
  const KineticRun run = run_kinetic(kb, rho0, steps, dt, with_residuals);

  real worst_increase = 0.0, worst_drift = 0.0;
  long worst_step = 0;
  for (std::size_t k = 0; k + 1 < run.rows.size(); ++k) {
    const real inc = run.rows[k + 1].entropy - run.rows[k].entropy;
    if (inc > worst_increase) {
      worst_increase = inc;
      worst_step = static_cast<long>(k + 1);
    }
  }
  // The recorded mass defect includes the mass added by clipping negative
  // values, so conservation is judged on the defect beyond the clipped mass.
  for (const KineticMonitorRow& row : run.rows)
    worst_drift = std::max(worst_drift, row.mass_drift - row.clipped_mass);
  worst_drift = std::max(worst_drift, 0.0);

  CheckReport mono = CheckReport::make("entropy-monotone", worst_increase, 1e-12, steps,
                                       "step " + std::to_string(worst_step), "none");
  mono.note = "largest per-step increase of the free-energy functional, clipped at zero";
  checks.push_back(mono);
  // The transport stencil's momentum-direction telescoping leaves a residue
  // proportional to the density on the outermost momentum rows, so the
  // conservation budget is the bundle's own boundary-tail allowance.
  CheckReport mass =
      CheckReport::make("mass-conserved", worst_drift, 1e-8, steps, "", "none");
  mass.note = "largest per-step mass defect beyond the clipped negative mass "
              "(bounded by the momentum-boundary tail mass)";
  checks.push_back(mass);
  CheckReport clip = CheckReport::make("clipping-negligible", run.cumulative_clipped, 1e-6,
                                       steps, "", "none");
  clip.note = "total negative mass clipped to zero over the evolution";
  checks.push_back(clip);

  std::ostringstream csv;
  csv << "t,mass_drift,clipped_mass,entropy,energy,orthogonality,poisson_residual,"
         "drift_residual\n";
  for (const KineticMonitorRow& row : run.rows)
    csv << csv_number(row.t) << ',' << csv_number(row.mass_drift) << ','
        << csv_number(row.clipped_mass) << ',' << csv_number(row.entropy) << ','
        << csv_number(row.energy) << ',' << csv_number(row.orthogonality) << ','
        << csv_number(row.poisson_residual) << ',' << csv_number(row.drift_residual)
        << '\n';
  out.artifacts["monitor.csv"] = csv.str();

  ordered_json state;
  state["nq"] = kb.grid.nq;
  state["np"] = kb.grid.np;
  state["q_min"] = kb.grid.q_min;
  state["q_max"] = kb.grid.q_max;
  state["p_max"] = kb.grid.p_max;
  std::vector<real> mass_vals(run.final_density.mass.data(),
                              run.final_density.mass.data() + run.final_density.mass.size());
  state["mass"] = mass_vals;
  out.artifacts["final_state.json"] = state.dump() + "\n";

  ordered_json details;
  details["mechanism"] = mechanism_name(kb.mechanism);
  details["grid"] = grid;
  details["steps"] = steps;
  details["dt"] = dt;
  details["initial_entropy"] = run.rows.front().entropy;
  details["final_entropy"] = run.rows.back().entropy;
  details["initial_energy"] = run.rows.front().energy;
  details["final_energy"] = run.rows.back().energy;
  details["cumulative_clipped"] = run.cumulative_clipped;
  details["tainted"] = run.tainted;
  finish_report(out, cfg, std::move(checks), std::move(details));
  return out;
}

// ---------------------------------------------------------------- particles

RunOutcome run_particles(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.report = report_skeleton(cfg);
  const long n = cfg.params.at("n").get<long>();
  const real T = cfg.params.at("T").get<real>();
  const real dt = cfg.params.at("dt").get<real>();
  const real m = cfg.params.at("m").get<real>();
  const real gamma = cfg.params.at("gamma").get<real>();
  const Mechanism mech = mechanism_for(cfg.builtin);

  ParticleEnsemble ens = make_particle_ensemble(mech, n, cfg.seed, m, gamma);
  scatter_gaussian(ens, 0.0, 1.0, 0.0, std::sqrt(m));
  const long steps = std::lround(T / dt);
  for (long k = 0; k < steps; ++k) step_particles(ens, dt);

  const real band = 1.63 / std::sqrt(static_cast<real>(n));  // 99% one-sample band
  std::vector<CheckReport> checks;
  CheckReport ksq = CheckReport::make("position-marginal-thermal",
                                      ks_distance_normal(ens.q, 0.0, 1.0), band, n);
  ksq.note = "Kolmogorov-Smirnov distance of the position marginal from its thermal law";
  checks.push_back(ksq);
  CheckReport ksp = CheckReport::make("momentum-marginal-thermal",
                                      ks_distance_normal(ens.p, 0.0, std::sqrt(m)), band, n);
  ksp.note = "Kolmogorov-Smirnov distance of the momentum marginal from its thermal law";
  checks.push_back(ksp);

  const KineticBundle kb = make_kinetic_bundle(mech, 64, 64, m, gamma);
  const BinnedMeasure binned = empirical_measure(ens, kb.grid);
  const real l1 = l1_grid_distance(binned.density, gibbs_density(kb));
  CheckReport gibbs = CheckReport::make("empirical-gibbs-distance", l1,
                                        25.0 / std::sqrt(static_cast<real>(n)), n);
  gibbs.note = "binned L1 distance from the grid equilibrium; tolerance scales as 1/sqrt(n)";
  checks.push_back(gibbs);

  real q_mean = 0, p_mean = 0;
  for (long i = 0; i < n; ++i) {
    q_mean += ens.q[static_cast<std::size_t>(i)];
    p_mean += ens.p[static_cast<std::size_t>(i)];
  }
  q_mean /= static_cast<real>(n);
  p_mean /= static_cast<real>(n);

  ordered_json details;
  details["mechanism"] = mechanism_name(mech);
  details["n"] = n;
  details["steps"] = steps;
  details["time"] = ens.time;
  details["q_mean"] = q_mean;
  details["p_mean"] = p_mean;
  details["binned_spill"] = binned.spill;
  finish_report(out, cfg, std::move(checks), std::move(details));
  out.has_ensemble = true;
  out.ensemble = std::move(ens);
  return out;
}

// -------------------------------------------------------------- convergence

RunOutcome run_convergence(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.report = report_skeleton(cfg);
  std::vector<long> counts;
  for (const auto& c : cfg.params.at("counts")) counts.push_back(c.get<long>());
  const int seeds = cfg.params.at("seeds").get<int>();
  const real T = cfg.params.at("T").get<real>();
  const real dt = cfg.params.at("dt").get<real>();
  const Mechanism mech = mechanism_for(cfg.builtin);

  const std::vector<ConvergenceRow> rows =
      particles_to_pde_convergence(mech, counts, seeds, T, dt, cfg.seed);

  // Demand strictly separated decrease: the (mean +/- std) band at each count
  // must lie below the band at the previous count.
  real worst_overlap = 0.0;
  std::string worst = "";
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const real lo_prev = rows[i].mean_l1 - rows[i].std_l1;
    const real hi_next = rows[i + 1].mean_l1 + rows[i + 1].std_l1;
    const real overlap = hi_next - lo_prev;
    if (overlap > worst_overlap) {
      worst_overlap = overlap;
      worst = "n=" + std::to_string(rows[i].n) + " -> n=" + std::to_string(rows[i + 1].n);
    }
  }
  worst_overlap = std::max(worst_overlap, 0.0);
  std::vector<CheckReport> checks;
  CheckReport mono = CheckReport::make("mean-distance-monotone", worst_overlap, 0.0,
                                       static_cast<long>(rows.size()), worst, "none");
  mono.note = "overlap between consecutive (mean +/- std) distance bands, clipped at zero";
  checks.push_back(mono);

  std::ostringstream csv;
  csv << "n,mean_l1,std_l1";
  for (int s = 0; s < seeds; ++s) csv << ",l1_seed_" << s;
  csv << '\n';
  for (const ConvergenceRow& r : rows) {
    csv << r.n << ',' << csv_number(r.mean_l1) << ',' << csv_number(r.std_l1);
    for (real v : r.per_seed) csv << ',' << csv_number(v);
    csv << '\n';
  }
  out.artifacts["convergence.csv"] = csv.str();

  ordered_json details;
  details["mechanism"] = mechanism_name(mech);
  details["rows"] = ordered_json::array();
  for (const ConvergenceRow& r : rows)
    details["rows"].push_back({{"n", r.n},
                               {"mean_l1", r.mean_l1},
                               {"std_l1", r.std_l1},
                               {"per_seed", r.per_seed}});
  finish_report(out, cfg, std::move(checks), std::move(details));
  return out;
}

}  // namespace

Bundle make_builtin_bundle(const std::string& name) {
  if (name == "quadratic-1d") return make_quadratic_1d();
  if (name == "cosh-1d") return make_cosh_1d();
  if (name == "rotation") return make_rotation();
  if (name == "hat-rotation") return hat_extend(make_rotation());
  if (name == "interp-rotation-half") return interpolate_extend(make_rotation(), 0.5);
  if (name == "damped-oscillator-base") return make_oscillator_base();
  if (name == "damped-oscillator") return make_damped_oscillator();
  if (name == "bar-damped-oscillator") return bar_extend(make_oscillator_base());
  if (name == "andersen-kinetic" || name == "vfp-kinetic")
    return make_kinetic_structure_bundle(make_kinetic_bundle(mechanism_for(name)));
  if (name == "bar-andersen-kinetic" || name == "bar-vfp-kinetic")
    return bar_extend(make_kinetic_structure_bundle(make_kinetic_bundle(mechanism_for(name))));
  throw ConfigError("/builtin", "no structure bundle behind '" + name + "'");
}

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::StructureAudit: return run_structure_audit(cfg);
    case ExperimentKind::Flow: return run_flow(cfg);
    case ExperimentKind::Kinetic: return run_kinetic_experiment(cfg);
    case ExperimentKind::Particles: return run_particles(cfg);
    default: return run_convergence(cfg);
  }
}

void write_outputs(const RunOutcome& out, const ExperimentConfig& cfg,
                   const std::string& out_dir, long elapsed_ms) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream f(out_dir + "/report.json", std::ios::binary);
    f << out.report.dump(2) << '\n';
  }
  {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    ordered_json meta;
    meta["timestamp"] = stamp;
    meta["elapsed_ms"] = elapsed_ms;
    meta["threads"] = cfg.threads;
    meta["out"] = out_dir;
    std::ofstream f(out_dir + "/metadata.json", std::ios::binary);
    f << meta.dump(2) << '\n';
  }
  for (const auto& [name, content] : out.artifacts) {
    std::ofstream f(out_dir + "/" + name, std::ios::binary);
    f << content;
  }
  if (out.has_ensemble) save_ensemble(out.ensemble, out_dir + "/ensemble.bin");
}

}  // namespace vds
