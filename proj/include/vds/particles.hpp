#pragma once

/*
 * Microscopic n-particle simulators matching the phase-space kinetic models:
 * symplectic-Euler drift with mean-field pair forces, plus either a jump
 * thermostat (momentum resampled from the Maxwellian with the exact
 * per-step thinning probability 1 - exp(-gamma dt)) or an Euler-Maruyama
 * friction-diffusion kick.
 *
 * Randomness is counter-based: every draw is a pure function of
 * (seed, stream, counter), where the stream is the particle's identity and
 * the counter encodes the step number and the purpose lane.  Consequences,
 * all tested: bitwise replay from a seed, jump decisions independent of
 * particle count and iteration order, and exchangeability (permuting
 * particles together with their streams permutes trajectories bitwise).
 *
 * The bridge to the grid side is the empirical measure (cell histogram
 * normalized to a GridDensity, out-of-grid particles counted as spill) and
 * the pre-limit Hamiltonian of the empirical process evaluated on cylinder
 * functionals F(rho) = phi(<f_1,rho>,...,<f_l,rho>): for the diffusion
 * mechanism the finite-n form exceeds the limit by exactly
 * (gamma/n) sum_ij d_i d_j phi <grad_p f_i grad_p f_j, rho>, so
 * n * (H_n - H) is constant in n to rounding; for the jump mechanism the
 * gap decays at rate 1/n.  Stationary sampling pools thinned snapshots for
 * marginal comparisons against the product Gibbs law.
 */

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vds/errors.hpp"
#include "vds/kinetic.hpp"
#include "vds/numerics.hpp"

namespace vds {

// --------------------------------------------------------------------------
// Counter-based randomness: pure functions of (seed, stream, counter).
// --------------------------------------------------------------------------

std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Uniform on (0,1] (never 0, so log() is safe).
real rng_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Standard normal via Box-Muller; consumes counters `counter` and `counter+1`.
real rng_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// --------------------------------------------------------------------------
// Ensembles.
// --------------------------------------------------------------------------

struct ParticleEnsemble {
  Mechanism mechanism{Mechanism::Andersen};
  real m{1.0};      // particle mass (thermal momentum variance)
  real gamma{1.0};  // thermostat intensity; 0 disables the mechanism step
  std::function<real(real)> dV;    // external force law V'(q); empty = free
  std::function<real(real)> dPhi;  // odd pair-force kernel Phi'(r); empty = none
  std::uint64_t seed{0};
  long step_count{0};  // drives the RNG counters; advanced by every step
  real time{0.0};
  std::vector<real> q, p;
  std::vector<std::uint64_t> stream;  // per-particle RNG substream identity

  long n() const { return static_cast<long>(q.size()); }
  void validate() const;  // n >= 1, matching sizes, finite coordinates
};

// Harmonic external force V'(q) = q, no interaction, all coordinates zero,
// streams 0..n-1.
ParticleEnsemble make_particle_ensemble(Mechanism mech, long n, std::uint64_t seed,
                                        real m = 1.0, real gamma = 1.0);

// Deterministically scatter the ensemble: q_i ~ N(q_mean, q_std^2),
// p_i ~ N(p_mean, p_std^2), drawn from each particle's stream at the
// reserved initialization counters (independent of the dynamics draws).
void scatter_gaussian(ParticleEnsemble& ens, real q_mean, real q_std, real p_mean,
                      real p_std);

// Largest admissible step: 0.4 times the tighter of the thermostat time
// m/gamma and the drift time sqrt(m / k), with k the steepest local
// stiffness |V'(q_i) - V'(0)| / |q_i| over the ensemble.  Infinite (no
// bound) for free streaming with gamma = 0.
real particle_dt_bound(const ParticleEnsemble& ens);

// One step: q_i += (p_i/m) dt; p_i -= [V'(q_i) + (1/2n) sum_j Phi'(q_i-q_j)] dt
// using the updated positions; then the mechanism step (jump thinning with
// probability 1 - exp(-gamma dt), or the Euler-Maruyama kick
// p += -gamma (p/m) dt + sqrt(2 gamma dt) N(0,1)).  dt = 0 is the identity;
// negative dt is invalid; dt above the bound refuses; a non-finite
// coordinate after the update aborts with the particle index.
void step_particles(ParticleEnsemble& ens, real dt);

// --------------------------------------------------------------------------
// Bridge to the grid.
// --------------------------------------------------------------------------

struct BinnedMeasure {
  GridDensity density;
  long spill{0};  // particles outside the grid (momentum out of range)
};

// Cell histogram around the nodes (q wraps periodically, p spills), with
// density = count / (n * cell volume), so the grid mass is 1 - spill/n.
BinnedMeasure empirical_measure(const ParticleEnsemble& ens, const PhaseGrid& grid);

// sum |a - b| * cell volume (grids must agree in shape).
real l1_grid_distance(const GridDensity& a, const GridDensity& b);

// --------------------------------------------------------------------------
// Cylinder functionals and the pre-limit Hamiltonian.
// --------------------------------------------------------------------------

struct CylinderFunction {
  struct Inner {
    std::function<real(real, real)> f;   // f_k(q, p), bounded and smooth
    std::function<real(real, real)> dp;  // analytic momentum derivative
  };
  std::vector<Inner> inner;
  std::function<real(const Vec&)> phi;  // outer function on R^l
  std::function<Vec(const Vec&)> grad;  // analytic gradient of phi
  std::function<Mat(const Vec&)> hess;  // analytic Hessian of phi

  int l() const { return static_cast<int>(inner.size()); }
  // l >= 1, all callables present, derivatives consistent with finite
  // differences at a few probe points.
  void validate() const;
};

// Frozen two-slot instance with a non-quadratic outer function; exercises
// every term of both Hamiltonian forms.
CylinderFunction make_test_cylinder();

// Single slot with identity outer function: for the diffusion mechanism the
// finite-n correction vanishes and prelimit == limit bitwise.
CylinderFunction make_linear_cylinder();

// Finite-n Hamiltonian (1/n) e^{-nF} A_n e^{nF} of the empirical process,
// evaluated at a grid density.  Jump mechanism: transport pairing plus the
// thermal-jump integral with exponent n [phi(v + delta/n) - phi(v)].
// Diffusion mechanism: the limit form plus (gamma/n) tr(hess phi . M) with
// M_ij = <grad_p f_i grad_p f_j, rho>.  n >= 1 required.
real prelimit_hamiltonian(const KineticBundle& kb, const GridDensity& rho,
                          const CylinderFunction& F, long n);

// The n -> infinity limit: <dF, W + G*> + gamma |dF|^2_{H^1_p(rho)} for the
// diffusion mechanism; <dF, W> plus the exponential jump integral of dF for
// the jump mechanism (which matches the grid macroscopic Hamiltonian at
// xi = dF(rho) to rounding, via the tilting identity).
real limit_hamiltonian(const KineticBundle& kb, const GridDensity& rho,
                       const CylinderFunction& F);

// --------------------------------------------------------------------------
// Stationary sampling.
// --------------------------------------------------------------------------

struct StationarySample {
  std::vector<real> q, p;  // pooled over snapshots, n values per snapshot
  long n{0};
  int snapshots{0};
};

// Scatter near the thermal law, burn in, then record thinned snapshots.
StationarySample sample_stationary(Mechanism mech, long n, std::uint64_t seed, real m,
                                   real gamma, real burn_in, real thin, int snapshots,
                                   real dt);

// Kolmogorov-Smirnov distance between the sample and N(mean, stddev^2).
real ks_distance_normal(std::vector<real> samples, real mean, real stddev);

// Probability mass per bin on k equal bins over [lo, hi); out-of-range
// values are ignored (they reduce the total mass).
std::vector<real> histogram_probabilities(const std::vector<real>& xs, real lo, real hi,
                                          int k);

// sum_b |a_b - b_b| over bins.
real l1_histogram_distance(const std::vector<real>& a, const std::vector<real>& b);

// Expected L1 deviation sum_b sqrt(2 p_b (1-p_b) / (pi n)) of an n-sample
// histogram from its model probabilities (normal approximation).
real expected_l1_sampling_error(const std::vector<real>& probs, long n_samples);

// --------------------------------------------------------------------------
// Particles -> grid dynamics convergence.
// --------------------------------------------------------------------------

struct ConvergenceRow {
  long n{0};
  real mean_l1{0};
  real std_l1{0};
  std::vector<real> per_seed;
};

// For each particle count: scatter the Gaussian cloud q ~ N(1, 0.3^2),
// p ~ N(0, 0.5^2) with `seeds` distinct seeds, evolve to time T alongside
// the grid dynamics started from the same product Gaussian, and record the
// L1 distances between the final empirical histograms and the grid state.
std::vector<ConvergenceRow> particles_to_pde_convergence(Mechanism mech,
                                                         const std::vector<long>& counts,
                                                         int seeds, real T, real dt,
                                                         std::uint64_t base_seed);

// --------------------------------------------------------------------------
// Serialization: flat little-endian binary (n, q-array, p-array) plus a
// JSON sidecar (mechanism, m, gamma, seed, step count, time, streams).
// --------------------------------------------------------------------------

void save_ensemble(const ParticleEnsemble& ens, const std::string& path);

// Force laws are code, not data: the caller re-supplies them.
ParticleEnsemble load_ensemble(const std::string& path, std::function<real(real)> dV,
                               std::function<real(real)> dPhi);

}  // namespace vds
