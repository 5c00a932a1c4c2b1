#pragma once

/*
 * Phase-space kinetic models on a rectangular (q,p) grid: a transport
 * operator generated by a symplectic Poisson structure, and two momentum
 * dissipation mechanisms — a jump-type thermostat that redistributes momentum
 * toward a discrete thermal weight, and a Fokker-Planck (friction plus
 * diffusion) operator in flux form.
 *
 * The discretization is structure-preserving by construction:
 *   - The Poisson application uses commuting centered stencils with
 *     logarithmic-mean density weights, so applying it to the field
 *     log(rho) + 1 (the difference between the entropy and energy gradients)
 *     cancels exactly, to rounding (~1e-13) rather than O(h^2).
 *   - The thermal weight is renormalized on the truncated momentum grid, so
 *     the jump dissipation has an exact discrete fixed point and its drift
 *     identity (the dissipation-potential gradient at minus half the entropy
 *     gradient equals the dissipation operator) holds to rounding.
 *   - The diffusion mechanism keeps flux form with zero-flux momentum
 *     boundaries; its drift identity holds to O(h^2) with ratio 4 under grid
 *     refinement.
 *
 * Residuals that are genuinely O(h^2): the transport/entropy-gradient
 * orthogonality defect, the diffusion drift identity, operator antisymmetry,
 * and the stationarity defect of the thermal equilibrium density.  Grid
 * bundles therefore carry a resolution-dependent structural tolerance
 * tol_kinetic(h).
 *
 * Dynamics use a fixed-step RK4 with a CFL-style refusal, renormalizing mass
 * each step (pre-renormalization drift recorded) and clipping negative cells
 * (clipped mass logged; runs whose cumulative clip exceeds 1e-6 are marked
 * tainted).
 *
 * make_kinetic_structure_bundle wraps a kinetic model as a structure bundle
 * (state = density values, Euclidean cotangent convention: functional
 * gradients are grid fields scaled by the cell volume), so the generic
 * structural checks and the state-space extensions apply to it.
 */

#include <cstdint>
#include <vector>

#include "vds/bundle.hpp"
#include "vds/check.hpp"
#include "vds/errors.hpp"
#include "vds/numerics.hpp"

namespace vds {

enum class Mechanism { Andersen, Vfp };

const char* mechanism_name(Mechanism mech);

// Structural tolerance for identities that are exact only in the continuum
// limit: second order in the grid spacing.
inline real tol_kinetic(real h) { return 10.0 * h * h; }

// Identities that cancel in exact arithmetic regardless of the grid.
inline constexpr real kTolKineticExact = 1e-12;

struct PhaseGrid {
  int nq{64}, np{64};
  real q_min{-8.0}, q_max{8.0};
  real p_max{8.0};
  bool periodic_q{true};

  real h_q() const { return (q_max - q_min) / nq; }
  real h_p() const { return 2.0 * p_max / (np - 1); }
  real cell_volume() const { return h_q() * h_p(); }
  real spacing() const { return std::max(h_q(), h_p()); }
  int size() const { return nq * np; }
  int idx(int i, int j) const { return i * np + j; }
  real q(int i) const { return q_min + i * h_q(); }
  real p(int j) const { return -p_max + j * h_p(); }
  void validate() const;
};

struct GridDensity {
  PhaseGrid grid;
  Vec mass;  // density values per node, row-major with p fastest

  real total_mass() const;
  void validate() const;  // sizes match, entries nonnegative, unit mass to 1e-10
};

struct KineticBundle {
  PhaseGrid grid;
  Mechanism mechanism{Mechanism::Andersen};
  real m{1.0};      // particle mass (thermal variance of the momentum)
  real gamma{1.0};  // dissipation intensity
  Vec V;            // external potential at the q nodes
  Vec Phi;          // interaction potential at the difference nodes k*h_q
  Vec maxwellian;   // thermal weight at the p nodes, renormalized on the grid

  // Fills the renormalized thermal weight and validates all invariants
  // (positive parameters, matching sizes, symmetric interaction, momentum
  // domain wide enough that the thermal mass outside is below 1e-8).
  void finalize();
  void validate() const;
};

// Harmonic external potential V = q^2/2, no interaction, q in [-8,8]
// periodic, p_max = 8*sqrt(m).
KineticBundle make_kinetic_bundle(Mechanism mech, int nq = 64, int np = 64, real m = 1.0,
                                  real gamma = 1.0);

// --------------------------------------------------------------------------
// Densities.
// --------------------------------------------------------------------------

GridDensity uniform_density(const PhaseGrid& grid);

// Thermal weight in p times uniform in q, normalized on the grid.
GridDensity maxwellian_uniform_density(const KineticBundle& kb);

// Self-consistent equilibrium exp(-dE)/Z (exact in one pass when Phi = 0).
GridDensity gibbs_density(const KineticBundle& kb);

// Deterministic family of smooth strictly positive densities: a Gaussian
// bump with Halton-driven center/width and a sinusoidal q-tilt, floored and
// normalized.  The same index yields the same continuum shape on any grid.
GridDensity sample_smooth_density(const KineticBundle& kb, std::uint64_t index);

// Deterministic family of smooth cotangent fields (values at the nodes).
Vec sample_xi_field(const PhaseGrid& grid, std::uint64_t index);

// --------------------------------------------------------------------------
// Functionals and their gradient fields (values at the nodes).
// --------------------------------------------------------------------------

// (Phi * rho)(q_i): interaction potential convolved with the q-marginal.
Vec interaction_field(const KineticBundle& kb, const GridDensity& rho);

// dE = p^2/(2m) + V(q) + (Phi*rho)(q).
Vec energy_gradient_field(const KineticBundle& kb, const GridDensity& rho);

// E = sum [p^2/(2m) + V + (Phi*rho)/2] rho vol.
real kinetic_energy(const KineticBundle& kb, const GridDensity& rho);

// dS = log(rho) + 1 + dE, with the density clamped at 1e-300.
Vec entropy_gradient_field(const KineticBundle& kb, const GridDensity& rho);

// S = sum rho log(rho) vol + E, with 0 log 0 = 0.
real kinetic_entropy(const KineticBundle& kb, const GridDensity& rho);

// --------------------------------------------------------------------------
// Operators (tangent fields at the nodes).
// --------------------------------------------------------------------------

// div(rho J grad xi) with log-mean density weights on commuting centered
// stencils; periodic in q, zero p-flux rows at the momentum boundary.
Vec poisson_apply(const KineticBundle& kb, const GridDensity& rho, const Vec& xi);

// Transport field W(rho): the Poisson operator applied to dE (same code
// path, so poisson_apply(rho, dE) matches bitwise).
Vec transport_field(const KineticBundle& kb, const GridDensity& rho);

// Mechanism dissipation G*(rho): jump redistribution toward the thermal
// weight (Andersen) or friction-diffusion flux form (Vfp).
Vec dissipation_field(const KineticBundle& kb, const GridDensity& rho);

// --------------------------------------------------------------------------
// Dissipation potentials and Hamiltonians.
// --------------------------------------------------------------------------

// Andersen: gamma * sum over column pairs of [cosh(xi_t - xi_s) - 1] times
// the geometric mean of the thermal weights and of the densities, weighted
// by h_q h_p^2.  Vfp: gamma * sum (D_p xi)^2 rho vol.
real psi_star_kinetic(const KineticBundle& kb, const GridDensity& rho, const Vec& xi);

// Gradient of the potential in the grid pairing <f,g> = sum f g vol
// (sinh-weighted column sums for Andersen; 2 gamma D_p^T(rho D_p xi) for
// Vfp).  At xi = -dS/2 this reproduces dissipation_field — exactly for
// Andersen, to O(h^2) for Vfp.
Vec psi_star_gradient(const KineticBundle& kb, const GridDensity& rho, const Vec& xi);

// Jump-process generator Hamiltonian of the Andersen mechanism:
// gamma * sum rho_s M_t h_p [exp(xi_t - xi_s) - 1] vol.  The dissipation
// potential is recovered from it by tilting: psi*(xi) = H2(xi + dS/2) -
// H2(dS/2).  Refuses the diffusion mechanism.
real jump_generator_hamiltonian(const KineticBundle& kb, const GridDensity& rho, const Vec& xi);

// Full large-deviation Hamiltonian <W(rho), xi> + psi*(xi - dS/2) -
// psi*(-dS/2); satisfies the generalized fluctuation symmetry around W.
real macroscopic_hamiltonian(const KineticBundle& kb, const GridDensity& rho, const Vec& xi);

// --------------------------------------------------------------------------
// Identity checks.
// --------------------------------------------------------------------------

// max |L(rho)(dS - dE)|: exact stencil cancellation, tol 1e-12.
CheckReport check_poisson_degeneracy(const KineticBundle& kb, const GridDensity& rho);

// |<W(rho), dS(rho)>_grid|: O(h^2), quartered under grid halving.
CheckReport check_transport_orthogonality(const KineticBundle& kb, const GridDensity& rho);

// max |psi_star_gradient(rho, -dS/2) - dissipation_field(rho)|: exact for
// the jump mechanism (tol 1e-12), O(h^2) for the diffusion mechanism.
CheckReport verify_drift_identity(const KineticBundle& kb, const GridDensity& rho);

// ||step(rho_inf) - rho_inf||_L1 / dt for the equilibrium density: O(h^2).
CheckReport check_gibbs_stationarity(const KineticBundle& kb, real dt);

// --------------------------------------------------------------------------
// Dynamics.
// --------------------------------------------------------------------------

// Largest admissible RK4 step: 0.4 times the tightest of the transport and
// dissipation stability times.
real cfl_bound(const KineticBundle& kb, const GridDensity& rho);

struct KineticStepResult {
  GridDensity density;
  real mass_drift{0};    // |mass - 1| before renormalization
  real clipped_mass{0};  // total negative mass clipped to zero
};

// One RK4 step of d(rho)/dt = transport + dissipation.  dt = 0 returns the
// input unchanged; dt above the CFL bound refuses with the computed bound;
// negative dt is invalid.
KineticStepResult step_kinetic(const KineticBundle& kb, const GridDensity& rho, real dt);

struct KineticMonitorRow {
  real t{0};
  real mass_drift{0};
  real clipped_mass{0};
  real entropy{0};
  real energy{0};
  real orthogonality{0};      // <W, dS>_grid
  real poisson_residual{0};   // max |L(dS - dE)|
  real drift_residual{0};     // NaN when identity monitoring is off
};

struct KineticRun {
  std::vector<KineticMonitorRow> rows;  // one per recorded state, including t=0
  GridDensity final_density;
  real cumulative_clipped{0};
  bool tainted{false};  // cumulative clipped mass exceeded 1e-6
};

// Fixed-step evolution with per-step monitors.  The drift-identity residual
// is the expensive column double sum, so it is only recorded when requested.
KineticRun run_kinetic(const KineticBundle& kb, const GridDensity& rho0, long steps, real dt,
                       bool with_identity_residuals);

// --------------------------------------------------------------------------
// Structure-bundle wrap.
// --------------------------------------------------------------------------

// Exposes the kinetic model to the generic structural machinery: state
// vector = density values, cotangent convention = grid field times cell
// volume, flow = transport plus the dissipation-potential gradient at
// -dS/2, custom Halton samplers, tol_override = tol_kinetic(spacing).
Bundle make_kinetic_structure_bundle(const KineticBundle& kb);

}  // namespace vds
