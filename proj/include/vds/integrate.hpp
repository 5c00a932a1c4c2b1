#pragma once

/*
 * Fixed-step classical Runge-Kutta (4th order) integration of bundle flows
 * dz/dt = F(z), with per-step monitors:
 *
 *  - every accepted state records S(z), E(z) (when the bundle declares an
 *    energy), and the variational residual along the flow (when a closed-form
 *    primal potential is available);
 *  - monitor_lyapunov: residual = max over steps of (S(z_{k+1})-S(z_k))/dt
 *    clipped below at zero, passing iff <= 10*dt^2 (an explicit integrator
 *    may overshoot monotonicity by its own discretization error);
 *  - monitor_energy: residual = max |E(z_k)-E(z_0)|, passing iff within a
 *    per-bundle tolerance C*dt^4*T calibrated by a dt-halving run of the same
 *    flow (with a rounding floor); exactly conserved coordinates report a
 *    bitwise-zero residual;
 *  - monitor_residual: max variational residual along the trajectory,
 *    passing iff <= 10x the static structural tolerance.
 *
 * Integration is aborted (partial trajectory, diagnostic reason) as soon as
 * a state leaves the finite range |z|_inf <= 1e12.  The step count is
 * round(T/dt); times are k*dt.  Everything is deterministic: re-running a
 * monitor or an integration reproduces its output bitwise.
 */

#include <iosfwd>
#include <string>
#include <vector>

#include "vds/bundle.hpp"
#include "vds/check.hpp"

namespace vds {

struct Trajectory {
  real dt{0};
  std::vector<real> times;
  std::vector<Vec> states;
  std::vector<real> S_vals;
  std::vector<real> E_vals;     // empty when the bundle declares no energy
  std::vector<real> residuals;  // empty when no closed-form primal potential
  bool aborted{false};
  std::string abort_reason;

  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  long steps() const { return static_cast<long>(states.size()) - 1; }
};

Trajectory integrate(const Bundle& b, const Vec& z0, real T, real dt);

CheckReport monitor_lyapunov(const Trajectory& traj);
CheckReport monitor_energy(const Bundle& b, const Trajectory& traj);
CheckReport monitor_residual(const Bundle& b, const Trajectory& traj);

// CSV serialization: header t,z1..zn,S[,E][,residual]; 17 significant digits;
// LF line endings.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);

}  // namespace vds
