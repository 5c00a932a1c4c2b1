#include "vds/integrate.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "vds/structure.hpp"

namespace vds {

namespace {

constexpr real kStateCap = 1e12;

// Rounding floor for the calibrated energy tolerance: even an exactly
// conserved quantity accumulates per-step rounding of this order.
constexpr real kEnergyFloorRel = 1e-13;

bool state_ok(const Vec& z) { return z.allFinite() && z.lpNorm<Eigen::Infinity>() <= kStateCap; }

void record(const Bundle& b, const Vec& z, Trajectory& t, bool with_energy, bool with_residual) {
  t.states.push_back(z);
  t.S_vals.push_back(b.S.value(z));
  if (with_energy) t.E_vals.push_back(b.E->value(z));
  if (with_residual) t.residuals.push_back(generic_residual(b, z, b.flow_velocity(z)));
}

}  // namespace

Trajectory integrate(const Bundle& b, const Vec& z0, real T, real dt) {
  if (!(dt > 0.0)) throw InvalidInput("integrate: step dt must be positive");
  if (!(T >= dt)) throw InvalidInput("integrate: horizon T must be at least one step");
  if (z0.size() != b.dim) throw InvalidInput("integrate: initial state dimension mismatch");
  const long steps = std::llround(T / dt);

  Trajectory t;
  t.dt = dt;
  const bool with_energy = static_cast<bool>(b.E);
  const bool with_residual = b.dissipation && b.dissipation->psi;
  t.times.reserve(steps + 1);
  t.states.reserve(steps + 1);

  Vec z = z0;
  if (!state_ok(z)) throw InvalidInput("integrate: initial state is not finite");
  t.times.push_back(0.0);
  record(b, z, t, with_energy, with_residual);

  for (long k = 0; k < steps; ++k) {
    const Vec k1 = b.flow_velocity(z);
    const Vec k2 = b.flow_velocity(z + (0.5 * dt) * k1);
    const Vec k3 = b.flow_velocity(z + (0.5 * dt) * k2);
    const Vec k4 = b.flow_velocity(z + dt * k3);
    const Vec znext = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const real tnext = static_cast<real>(k + 1) * dt;
    if (!state_ok(znext)) {
      std::ostringstream os;
      os << "state blow-up at t=" << tnext << ": non-finite or exceeding " << kStateCap;
      t.aborted = true;
      t.abort_reason = os.str();
      return t;
    }
    z = znext;
    t.times.push_back(tnext);
    record(b, z, t, with_energy, with_residual);
  }
  return t;
}

CheckReport monitor_lyapunov(const Trajectory& traj) {
  const char* name = "lyapunov-monotonicity";
  if (traj.S_vals.size() < 2)
    return CheckReport::not_applicable(name, "trajectory has fewer than two states");
  real worst = 0.0;
  long worst_k = 0;
  for (std::size_t k = 0; k + 1 < traj.S_vals.size(); ++k) {
    const real rate = (traj.S_vals[k + 1] - traj.S_vals[k]) / traj.dt;
    if (rate > worst) {
      worst = rate;
      worst_k = static_cast<long>(k);
    }
  }
  std::ostringstream loc;
  loc << "step " << worst_k << " (t=" << traj.times[worst_k] << ")";
  CheckReport rep = CheckReport::make(name, worst, tol_lyapunov(traj.dt),
                                      static_cast<long>(traj.S_vals.size()) - 1, loc.str());
  if (traj.aborted) rep.note = "trajectory aborted early: " + traj.abort_reason;
  return rep;
}

CheckReport monitor_energy(const Bundle& b, const Trajectory& traj) {
  const char* name = "energy-conservation";
  if (!b.E) return CheckReport::not_applicable(name, "bundle declares no energy functional");
  if (traj.E_vals.size() < 2)
    return CheckReport::not_applicable(name, "trajectory has fewer than two states");
  if (traj.aborted)
    return CheckReport::not_applicable(name, "trajectory aborted early: " + traj.abort_reason);

  const real e0 = traj.E_vals.front();
  real drift = 0.0;
  long worst_k = 0;
  for (std::size_t k = 0; k < traj.E_vals.size(); ++k) {
    const real d = std::fabs(traj.E_vals[k] - e0);
    if (d > drift) {
      drift = d;
      worst_k = static_cast<long>(k);
    }
  }

  // Calibrate C of tol = C*dt^4*T by a dt-halving run of the same flow: the
  // half-step drift is ~C*(dt/2)^4*T, so the full-step tolerance (with a 3x
  // safety factor) is 3*16 = 48 times the measured half-step drift.
  const real T = traj.times.back();
  const Trajectory half = integrate(b, traj.states.front(), T, 0.5 * traj.dt);
  real drift_half = 0.0;
  if (half.aborted || half.E_vals.size() < 2)
    return CheckReport::not_applicable(name, "dt-halving calibration run failed");
  for (const real e : half.E_vals) drift_half = std::max(drift_half, std::fabs(e - e0));
  const real tol = std::max(48.0 * drift_half, kEnergyFloorRel * (1.0 + std::fabs(e0)));

  std::ostringstream loc;
  loc << "step " << worst_k << " (t=" << traj.times[worst_k] << ")";
  CheckReport rep =
      CheckReport::make(name, drift, tol, static_cast<long>(traj.E_vals.size()), loc.str());
  // An exactly frozen or conserved energy reports a bitwise-zero residual and
  // passes against the rounding floor alone.
  return rep;
}

CheckReport monitor_residual(const Bundle& b, const Trajectory& traj) {
  const char* name = "flow-generic-residual";
  if (traj.residuals.empty())
    return CheckReport::not_applicable(name,
                                       "no closed-form primal potential to evaluate along the flow");
  real worst = -1.0;
  long worst_k = 0, skipped = 0;
  for (std::size_t k = 0; k < traj.residuals.size(); ++k) {
    const real r = traj.residuals[k];
    if (std::isnan(r)) {
      ++skipped;
      continue;
    }
    if (r > worst) {
      worst = r;
      worst_k = static_cast<long>(k);
    }
  }
  if (worst < 0.0)
    return CheckReport::not_applicable(name, "residual inconclusive at every state");
  std::ostringstream loc;
  loc << "step " << worst_k << " (t=" << traj.times[worst_k] << ")";
  CheckReport rep = CheckReport::make(name, worst, 10.0 * b.tol_struct(),
                                      static_cast<long>(traj.residuals.size()) - skipped,
                                      loc.str());
  if (skipped > 0) {
    std::ostringstream note;
    note << skipped << " state(s) inconclusive";
    rep.note = note.str();
  }
  if (traj.aborted) rep.note += (rep.note.empty() ? "" : "; ") + ("trajectory aborted early: " + traj.abort_reason);
  return rep;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  const int n = traj.dim();
  os.precision(17);
  os << "t";
  for (int d = 1; d <= n; ++d) os << ",z" << d;
  os << ",S";
  if (!traj.E_vals.empty()) os << ",E";
  if (!traj.residuals.empty()) os << ",residual";
  os << "\n";
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    os << traj.times[k];
    for (int d = 0; d < n; ++d) os << "," << traj.states[k][d];
    os << "," << traj.S_vals[k];
    if (!traj.E_vals.empty()) os << "," << traj.E_vals[k];
    if (!traj.residuals.empty()) os << "," << traj.residuals[k];
    os << "\n";
  }
}

}  // namespace vds
