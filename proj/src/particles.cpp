#include "vds/particles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vds {

static_assert(std::endian::native == std::endian::little,
              "ensemble serialization assumes a little-endian host");

// --------------------------------------------------------------------------
// Counter-based randomness.
// --------------------------------------------------------------------------

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Reserved counters 0..3 initialize coordinates; dynamics step k draws from
// counters 4(k+1)..4(k+1)+3, so init and every step own disjoint lanes.
constexpr std::uint64_t kCtrInitQ = 0;
constexpr std::uint64_t kCtrInitP = 2;
std::uint64_t step_counter(long step) { return 4ULL * (static_cast<std::uint64_t>(step) + 1ULL); }

}  // namespace

std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix64(seed ^ mix64(stream ^ mix64(counter ^ 0x9e3779b97f4a7c15ULL)));
}

real rng_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return static_cast<real>((rng_word(seed, stream, counter) >> 11) + 1ULL) * 0x1.0p-53;
}

real rng_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const real u1 = rng_uniform(seed, stream, counter);
  const real u2 = rng_uniform(seed, stream, counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// --------------------------------------------------------------------------
// Ensembles.
// --------------------------------------------------------------------------

void ParticleEnsemble::validate() const {
  if (q.empty()) throw InvalidInput("ParticleEnsemble: at least one particle required");
  if (p.size() != q.size() || stream.size() != q.size())
    throw InvalidInput("ParticleEnsemble: coordinate and stream arrays must share a size");
  if (!(m > 0.0)) throw InvalidInput("ParticleEnsemble: positive mass required");
  if (!(gamma >= 0.0)) throw InvalidInput("ParticleEnsemble: nonnegative gamma required");
  for (long i = 0; i < n(); ++i)
    if (!is_finite(q[i]) || !is_finite(p[i])) {
      std::ostringstream os;
      os << "ParticleEnsemble: non-finite coordinate at particle " << i;
      throw InvalidInput(os.str());
    }
}

ParticleEnsemble make_particle_ensemble(Mechanism mech, long n, std::uint64_t seed, real m,
                                        real gamma) {
  if (n < 1) throw InvalidInput("make_particle_ensemble: at least one particle required");
  ParticleEnsemble ens;
  ens.mechanism = mech;
  ens.m = m;
  ens.gamma = gamma;
  ens.dV = [](real q) { return q; };
  ens.seed = seed;
  ens.q.assign(static_cast<std::size_t>(n), 0.0);
  ens.p.assign(static_cast<std::size_t>(n), 0.0);
  ens.stream.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) ens.stream[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
  ens.validate();
  return ens;
}

void scatter_gaussian(ParticleEnsemble& ens, real q_mean, real q_std, real p_mean,
                      real p_std) {
  ens.validate();
  if (!(q_std >= 0.0) || !(p_std >= 0.0))
    throw InvalidInput("scatter_gaussian: nonnegative widths required");
  for (long i = 0; i < ens.n(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    ens.q[k] = q_mean + q_std * rng_normal(ens.seed, ens.stream[k], kCtrInitQ);
    ens.p[k] = p_mean + p_std * rng_normal(ens.seed, ens.stream[k], kCtrInitP);
  }
}

real particle_dt_bound(const ParticleEnsemble& ens) {
  real bound = kInf;
  if (ens.gamma > 0.0) bound = std::min(bound, ens.m / ens.gamma);
  if (ens.dV) {
    const real f0 = ens.dV(0.0);
    real k_max = 0.0;
    for (long i = 0; i < ens.n(); ++i) {
      const real qi = ens.q[static_cast<std::size_t>(i)];
      if (std::fabs(qi) > 1e-12)
        k_max = std::max(k_max, std::fabs(ens.dV(qi) - f0) / std::fabs(qi));
    }
    if (k_max > 0.0) bound = std::min(bound, std::sqrt(ens.m / k_max));
  }
  return 0.4 * bound;
}

void step_particles(ParticleEnsemble& ens, real dt) {
  ens.validate();
  if (!(dt >= 0.0)) throw InvalidInput("step_particles: nonnegative dt required");
  if (dt == 0.0) return;
  const real bound = particle_dt_bound(ens);
  if (dt > bound) {
    std::ostringstream os;
    os << "step_particles: step " << dt << " exceeds the stability bound " << bound;
    throw NumericalRefusal(os.str());
  }
  if (ens.dPhi && std::fabs(ens.dPhi(0.0)) != 0.0)
    throw InvalidInput("step_particles: the pair-force kernel must be odd (zero at zero)");

  const long n = ens.n();
  // drift: positions first, then momenta from the updated positions
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ens.q[k] += (ens.p[k] / ens.m) * dt;
  }
  std::vector<real> force(static_cast<std::size_t>(n), 0.0);
  if (ens.dV)
    for (long i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      force[k] += ens.dV(ens.q[k]);
    }
  if (ens.dPhi) {
    const real scale = 1.0 / (2.0 * static_cast<real>(n));
    for (long i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      real f = 0.0;
      for (long j = 0; j < n; ++j) f += ens.dPhi(ens.q[k] - ens.q[static_cast<std::size_t>(j)]);
      force[k] += scale * f;
    }
  }
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ens.p[k] -= force[k] * dt;
  }

  // mechanism step, one reserved counter block per step
  if (ens.gamma > 0.0) {
    const std::uint64_t base = step_counter(ens.step_count);
    if (ens.mechanism == Mechanism::Andersen) {
      const real p_jump = -std::expm1(-ens.gamma * dt);
      const real root_m = std::sqrt(ens.m);
      for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (rng_uniform(ens.seed, ens.stream[k], base) <= p_jump)
          ens.p[k] = root_m * rng_normal(ens.seed, ens.stream[k], base + 1);
      }
    } else {
      const real kick = std::sqrt(2.0 * ens.gamma * dt);
      const real fric = ens.gamma * dt / ens.m;
      for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        ens.p[k] += -fric * ens.p[k] + kick * rng_normal(ens.seed, ens.stream[k], base);
      }
    }
  }

  ens.step_count += 1;
  ens.time += dt;
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!is_finite(ens.q[k]) || !is_finite(ens.p[k])) {
      std::ostringstream os;
      os << "step_particles: non-finite coordinate produced at particle " << i << " (q="
         << ens.q[k] << ", p=" << ens.p[k] << ", t=" << ens.time << ")";
      throw NumericalRefusal(os.str());
    }
  }
}

// --------------------------------------------------------------------------
// Bridge to the grid.
// --------------------------------------------------------------------------

BinnedMeasure empirical_measure(const ParticleEnsemble& ens, const PhaseGrid& grid) {
  ens.validate();
  grid.validate();
  const real L = grid.q_max - grid.q_min;
  Vec counts = Vec::Zero(grid.size());
  long spill = 0;
  for (long i = 0; i < ens.n(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    real qq = ens.q[k] - grid.q_min;
    qq -= L * std::floor(qq / L);  // periodic wrap into [0, L)
    int iq = static_cast<int>(std::floor(qq / grid.h_q() + 0.5));
    if (iq >= grid.nq) iq = 0;  // the upper half-cell belongs to node 0
    const int jp = static_cast<int>(std::floor((ens.p[k] + grid.p_max) / grid.h_p() + 0.5));
    if (jp < 0 || jp >= grid.np) {
      ++spill;
      continue;
    }
    counts[grid.idx(iq, jp)] += 1.0;
  }
  const real scale = 1.0 / (static_cast<real>(ens.n()) * grid.cell_volume());
  BinnedMeasure out{GridDensity{grid, counts * scale}, spill};
  return out;
}

real l1_grid_distance(const GridDensity& a, const GridDensity& b) {
  if (a.grid.nq != b.grid.nq || a.grid.np != b.grid.np ||
      a.mass.size() != b.mass.size())
    throw InvalidInput("l1_grid_distance: grids must share a shape");
  return (a.mass - b.mass).cwiseAbs().sum() * a.grid.cell_volume();
}

// --------------------------------------------------------------------------
// Cylinder functionals and the pre-limit Hamiltonian.
// --------------------------------------------------------------------------

void CylinderFunction::validate() const {
  if (inner.empty()) throw InvalidInput("CylinderFunction: at least one inner function");
  if (!phi || !grad || !hess)
    throw InvalidInput("CylinderFunction: outer function and derivatives required");
  for (const auto& slot : inner)
    if (!slot.f || !slot.dp)
      throw InvalidInput("CylinderFunction: every inner slot needs f and its p-derivative");

  const real h = 1e-5;
  const real probes[2][2] = {{0.3, -0.7}, {-1.1, 0.4}};
  for (const auto& pr : probes)
    for (const auto& slot : inner) {
      const real fd = (slot.f(pr[0], pr[1] + h) - slot.f(pr[0], pr[1] - h)) / (2.0 * h);
      if (std::fabs(fd - slot.dp(pr[0], pr[1])) > 1e-6)
        throw InvalidInput("CylinderFunction: inner p-derivative inconsistent with f");
    }
  const int width = l();
  Vec v(width);
  for (int i = 0; i < width; ++i) v[i] = 0.3 - 0.1 * i;
  const Vec g = grad(v);
  const Mat hmat = hess(v);
  if (g.size() != width || hmat.rows() != width || hmat.cols() != width)
    throw InvalidInput("CylinderFunction: derivative shapes must match the slot count");
  for (int i = 0; i < width; ++i) {
    Vec vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    if (std::fabs((phi(vp) - phi(vm)) / (2.0 * h) - g[i]) > 1e-6)
      throw InvalidInput("CylinderFunction: outer gradient inconsistent with phi");
    const Vec gd = (grad(vp) - grad(vm)) / (2.0 * h);
    for (int j = 0; j < width; ++j)
      if (std::fabs(gd[j] - hmat(i, j)) > 1e-5)
        throw InvalidInput("CylinderFunction: outer Hessian inconsistent with the gradient");
  }
}

CylinderFunction make_test_cylinder() {
  CylinderFunction F;
  F.inner.push_back({[](real q, real p) { return std::tanh(p) * std::cos(q); },
                     [](real q, real p) {
                       const real t = std::tanh(p);
                       return (1.0 - t * t) * std::cos(q);
                     }});
  F.inner.push_back({[](real q, real p) { return std::exp(-0.25 * p * p) * std::sin(q); },
                     [](real q, real p) {
                       return -0.5 * p * std::exp(-0.25 * p * p) * std::sin(q);
                     }});
  F.phi = [](const Vec& v) {
    return v[0] * v[0] + 0.5 * v[0] * v[1] + 0.25 * v[1] * v[1] + 0.1 * std::sin(v[0]);
  };
  F.grad = [](const Vec& v) {
    Vec g(2);
    g[0] = 2.0 * v[0] + 0.5 * v[1] + 0.1 * std::cos(v[0]);
    g[1] = 0.5 * v[0] + 0.5 * v[1];
    return g;
  };
  F.hess = [](const Vec& v) {
    Mat h(2, 2);
    h(0, 0) = 2.0 - 0.1 * std::sin(v[0]);
    h(0, 1) = h(1, 0) = 0.5;
    h(1, 1) = 0.5;
    return h;
  };
  F.validate();
  return F;
}

CylinderFunction make_linear_cylinder() {
  CylinderFunction F;
  F.inner.push_back({[](real q, real p) { return std::tanh(p) * std::cos(q); },
                     [](real q, real p) {
                       const real t = std::tanh(p);
                       return (1.0 - t * t) * std::cos(q);
                     }});
  F.phi = [](const Vec& v) { return v[0]; };
  F.grad = [](const Vec&) { return Vec(Vec::Ones(1)); };
  F.hess = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  F.validate();
  return F;
}

namespace {

struct CylinderAtDensity {
  std::vector<Vec> fvals, dpvals;  // inner functions at the nodes
  Vec v;                           // slot integrals <f_k, rho>
  Vec g;                           // outer gradient at v
  Vec dF;                          // functional derivative field at the nodes
};

CylinderAtDensity evaluate_cylinder(const PhaseGrid& grid, const GridDensity& rho,
                                    const CylinderFunction& F) {
  const int width = F.l();
  CylinderAtDensity out;
  out.fvals.resize(static_cast<std::size_t>(width));
  out.dpvals.resize(static_cast<std::size_t>(width));
  out.v = Vec(width);
  for (int k = 0; k < width; ++k) {
    Vec fv(grid.size()), dv(grid.size());
    const auto& slot = F.inner[static_cast<std::size_t>(k)];
    for (int i = 0; i < grid.nq; ++i)
      for (int j = 0; j < grid.np; ++j) {
        fv[grid.idx(i, j)] = slot.f(grid.q(i), grid.p(j));
        dv[grid.idx(i, j)] = slot.dp(grid.q(i), grid.p(j));
      }
    out.v[k] = (fv.array() * rho.mass.array()).sum() * grid.cell_volume();
    out.fvals[static_cast<std::size_t>(k)] = std::move(fv);
    out.dpvals[static_cast<std::size_t>(k)] = std::move(dv);
  }
  out.g = F.grad(out.v);
  out.dF = Vec::Zero(grid.size());
  for (int k = 0; k < width; ++k) out.dF += out.g[k] * out.fvals[static_cast<std::size_t>(k)];
  return out;
}

// The jump integral gamma sum_rho sum_{p'} M(p') [exp(exponent) - 1] with a
// caller-chosen exponent for the column pair (j -> j').
template <typename Exponent>
real jump_integral(const KineticBundle& kb, const GridDensity& rho, Exponent&& expnt) {
  const PhaseGrid& g = kb.grid;
  const real hp = g.h_p(), vol = g.cell_volume();
  real total = 0.0;
  for (int i = 0; i < g.nq; ++i) {
    for (int j = 0; j < g.np; ++j) {
      const real mass = rho.mass[g.idx(i, j)];
      if (mass == 0.0) continue;
      real inner_sum = 0.0;
      for (int jp = 0; jp < g.np; ++jp)
        inner_sum += kb.maxwellian[jp] * std::expm1(expnt(i, j, jp));
      total += mass * inner_sum;
    }
  }
  return kb.gamma * total * hp * vol;
}

}  // namespace

real prelimit_hamiltonian(const KineticBundle& kb, const GridDensity& rho,
                          const CylinderFunction& F, long n) {
  if (n < 1) throw InvalidInput("prelimit_hamiltonian: at least one particle required");
  kb.validate();
  rho.validate();
  F.validate();
  const PhaseGrid& g = kb.grid;
  const CylinderAtDensity cyl = evaluate_cylinder(g, rho, F);
  const real vol = g.cell_volume();
  const real transport = (cyl.dF.array() * transport_field(kb, rho).array()).sum() * vol;

  if (kb.mechanism == Mechanism::Andersen) {
    const real phi_v = F.phi(cyl.v);
    const real inv_n = 1.0 / static_cast<real>(n);
    const int width = F.l();
    Vec shifted(width);
    const real jump = jump_integral(kb, rho, [&](int i, int j, int jp) {
      for (int k = 0; k < width; ++k) {
        const Vec& fv = cyl.fvals[static_cast<std::size_t>(k)];
        shifted[k] = cyl.v[k] + inv_n * (fv[g.idx(i, jp)] - fv[g.idx(i, j)]);
      }
      return static_cast<real>(n) * (F.phi(shifted) - phi_v);
    });
    return transport + jump;
  }

  // diffusion mechanism: closed quadratic form plus the exact 1/n correction
  const int width = F.l();
  Mat moments(width, width);
  for (int a = 0; a < width; ++a)
    for (int b = a; b < width; ++b) {
      const real mab = (cyl.dpvals[static_cast<std::size_t>(a)].array() *
                        cyl.dpvals[static_cast<std::size_t>(b)].array() * rho.mass.array())
                           .sum() *
                       vol;
      moments(a, b) = moments(b, a) = mab;
    }
  const real drift = (cyl.dF.array() * dissipation_field(kb, rho).array()).sum() * vol;
  const real quad = kb.gamma * cyl.g.dot(moments * cyl.g);
  const real correction = kb.gamma * (F.hess(cyl.v).array() * moments.array()).sum();
  return transport + drift + quad + correction / static_cast<real>(n);
}

real limit_hamiltonian(const KineticBundle& kb, const GridDensity& rho,
                       const CylinderFunction& F) {
  kb.validate();
  rho.validate();
  F.validate();
  const PhaseGrid& g = kb.grid;
  const CylinderAtDensity cyl = evaluate_cylinder(g, rho, F);
  const real vol = g.cell_volume();
  const real transport = (cyl.dF.array() * transport_field(kb, rho).array()).sum() * vol;

  if (kb.mechanism == Mechanism::Andersen) {
    const real jump = jump_integral(kb, rho, [&](int i, int j, int jp) {
      return cyl.dF[g.idx(i, jp)] - cyl.dF[g.idx(i, j)];
    });
    return transport + jump;
  }

  const int width = F.l();
  Mat moments(width, width);
  for (int a = 0; a < width; ++a)
    for (int b = a; b < width; ++b) {
      const real mab = (cyl.dpvals[static_cast<std::size_t>(a)].array() *
                        cyl.dpvals[static_cast<std::size_t>(b)].array() * rho.mass.array())
                           .sum() *
                       vol;
      moments(a, b) = moments(b, a) = mab;
    }
  const real drift = (cyl.dF.array() * dissipation_field(kb, rho).array()).sum() * vol;
  const real quad = kb.gamma * cyl.g.dot(moments * cyl.g);
  return transport + drift + quad;
}

// --------------------------------------------------------------------------
// Stationary sampling.
// --------------------------------------------------------------------------

StationarySample sample_stationary(Mechanism mech, long n, std::uint64_t seed, real m,
                                   real gamma, real burn_in, real thin, int snapshots,
                                   real dt) {
  if (snapshots < 1) throw InvalidInput("sample_stationary: at least one snapshot");
  if (!(dt > 0.0) || !(thin > 0.0) || !(burn_in >= 0.0))
    throw InvalidInput("sample_stationary: positive dt and thin, nonnegative burn-in");
  ParticleEnsemble ens = make_particle_ensemble(mech, n, seed, m, gamma);
  scatter_gaussian(ens, 0.0, 1.0, 0.0, std::sqrt(m));
  const long burn_steps = std::lround(burn_in / dt);
  const long thin_steps = std::max<long>(1, std::lround(thin / dt));
  for (long k = 0; k < burn_steps; ++k) step_particles(ens, dt);
  StationarySample out;
  out.n = n;
  out.snapshots = snapshots;
  out.q.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(snapshots));
  out.p.reserve(out.q.capacity());
  for (int s = 0; s < snapshots; ++s) {
    for (long k = 0; k < thin_steps; ++k) step_particles(ens, dt);
    out.q.insert(out.q.end(), ens.q.begin(), ens.q.end());
    out.p.insert(out.p.end(), ens.p.begin(), ens.p.end());
  }
  return out;
}

real ks_distance_normal(std::vector<real> samples, real mean, real stddev) {
  if (samples.empty()) throw InvalidInput("ks_distance_normal: empty sample");
  if (!(stddev > 0.0)) throw InvalidInput("ks_distance_normal: positive stddev required");
  std::sort(samples.begin(), samples.end());
  const real inv_n = 1.0 / static_cast<real>(samples.size());
  real worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const real cdf = 0.5 * std::erfc(-(samples[i] - mean) / (stddev * std::sqrt(2.0)));
    worst = std::max(worst, std::fabs(cdf - static_cast<real>(i) * inv_n));
    worst = std::max(worst, std::fabs(static_cast<real>(i + 1) * inv_n - cdf));
  }
  return worst;
}

std::vector<real> histogram_probabilities(const std::vector<real>& xs, real lo, real hi,
                                          int k) {
  if (k < 1 || !(hi > lo)) throw InvalidInput("histogram_probabilities: bad bin layout");
  if (xs.empty()) throw InvalidInput("histogram_probabilities: empty sample");
  std::vector<real> probs(static_cast<std::size_t>(k), 0.0);
  const real w = (hi - lo) / k;
  const real share = 1.0 / static_cast<real>(xs.size());
  for (real x : xs) {
    const int b = static_cast<int>(std::floor((x - lo) / w));
    if (b >= 0 && b < k) probs[static_cast<std::size_t>(b)] += share;
  }
  return probs;
}

real l1_histogram_distance(const std::vector<real>& a, const std::vector<real>& b) {
  if (a.size() != b.size())
    throw InvalidInput("l1_histogram_distance: bin counts must match");
  real total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::fabs(a[i] - b[i]);
  return total;
}

real expected_l1_sampling_error(const std::vector<real>& probs, long n_samples) {
  if (n_samples < 1) throw InvalidInput("expected_l1_sampling_error: need samples");
  real total = 0.0;
  for (real p : probs)
    if (p > 0.0 && p < 1.0)
      total += std::sqrt(2.0 * p * (1.0 - p) / (kPi * static_cast<real>(n_samples)));
  return total;
}

// --------------------------------------------------------------------------
// Particles -> grid dynamics convergence.
// --------------------------------------------------------------------------

std::vector<ConvergenceRow> particles_to_pde_convergence(Mechanism mech,
                                                         const std::vector<long>& counts,
                                                         int seeds, real T, real dt,
                                                         std::uint64_t base_seed) {
  if (counts.empty() || seeds < 1 || !(T > 0.0) || !(dt > 0.0))
    throw InvalidInput("particles_to_pde_convergence: bad experiment layout");
  KineticBundle kb = make_kinetic_bundle(mech);
  const PhaseGrid& g = kb.grid;

  // grid start: the same product Gaussian law the particles are scattered from
  const real q_mean = 1.0, q_std = 0.3, p_std = 0.5;
  Vec mass(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) {
      const real zq = (g.q(i) - q_mean) / q_std;
      const real zp = g.p(j) / p_std;
      mass[g.idx(i, j)] = std::exp(-0.5 * (zq * zq + zp * zp));
    }
  mass /= mass.sum() * g.cell_volume();
  const long steps = std::lround(T / dt);
  const GridDensity rho_T =
      run_kinetic(kb, GridDensity{g, mass}, steps, dt, false).final_density;

  std::vector<ConvergenceRow> rows;
  for (long n : counts) {
    ConvergenceRow row;
    row.n = n;
    real sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
      ParticleEnsemble ens = make_particle_ensemble(
          mech, n, base_seed + static_cast<std::uint64_t>(s), kb.m, kb.gamma);
      scatter_gaussian(ens, q_mean, q_std, 0.0, p_std);
      for (long k = 0; k < steps; ++k) step_particles(ens, dt);
      const real d = l1_grid_distance(empirical_measure(ens, g).density, rho_T);
      row.per_seed.push_back(d);
      sum += d;
      sum_sq += d * d;
    }
    row.mean_l1 = sum / seeds;
    row.std_l1 =
        seeds > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / seeds) / (seeds - 1)))
                  : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

// --------------------------------------------------------------------------
// Serialization.
// --------------------------------------------------------------------------

void save_ensemble(const ParticleEnsemble& ens, const std::string& path) {
  ens.validate();
  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw InvalidInput("save_ensemble: cannot open " + path);
  const std::int64_t n = ens.n();
  bin.write(reinterpret_cast<const char*>(&n), sizeof n);
  bin.write(reinterpret_cast<const char*>(ens.q.data()),
            static_cast<std::streamsize>(sizeof(real) * ens.q.size()));
  bin.write(reinterpret_cast<const char*>(ens.p.data()),
            static_cast<std::streamsize>(sizeof(real) * ens.p.size()));
  if (!bin) throw InvalidInput("save_ensemble: short write to " + path);
  bin.close();

  nlohmann::ordered_json side;
  side["mechanism"] = mechanism_name(ens.mechanism);
  side["m"] = ens.m;
  side["gamma"] = ens.gamma;
  side["seed"] = ens.seed;
  side["step_count"] = ens.step_count;
  side["time"] = ens.time;
  side["stream"] = ens.stream;
  std::ofstream meta(path + ".json", std::ios::trunc);
  if (!meta) throw InvalidInput("save_ensemble: cannot open " + path + ".json");
  meta << side.dump(2) << "\n";
}

ParticleEnsemble load_ensemble(const std::string& path, std::function<real(real)> dV,
                               std::function<real(real)> dPhi) {
  std::ifstream meta(path + ".json");
  if (!meta) throw InvalidInput("load_ensemble: cannot open " + path + ".json");
  nlohmann::json side;
  try {
    meta >> side;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("load_ensemble: bad sidecar: ") + e.what());
  }

  ParticleEnsemble ens;
  const std::string mech = side.at("mechanism").get<std::string>();
  if (mech == mechanism_name(Mechanism::Andersen))
    ens.mechanism = Mechanism::Andersen;
  else if (mech == mechanism_name(Mechanism::Vfp))
    ens.mechanism = Mechanism::Vfp;
  else
    throw InvalidInput("load_ensemble: unknown mechanism " + mech);
  ens.m = side.at("m").get<real>();
  ens.gamma = side.at("gamma").get<real>();
  ens.seed = side.at("seed").get<std::uint64_t>();
  ens.step_count = side.at("step_count").get<long>();
  ens.time = side.at("time").get<real>();
  ens.stream = side.at("stream").get<std::vector<std::uint64_t>>();
  ens.dV = std::move(dV);
  ens.dPhi = std::move(dPhi);

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw InvalidInput("load_ensemble: cannot open " + path);
  std::int64_t n = 0;
  bin.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!bin || n < 1 || static_cast<std::size_t>(n) != ens.stream.size())
    throw InvalidInput("load_ensemble: particle count disagrees with the sidecar");
  ens.q.resize(static_cast<std::size_t>(n));
  ens.p.resize(static_cast<std::size_t>(n));
  bin.read(reinterpret_cast<char*>(ens.q.data()),
           static_cast<std::streamsize>(sizeof(real) * ens.q.size()));
  bin.read(reinterpret_cast<char*>(ens.p.data()),
           static_cast<std::streamsize>(sizeof(real) * ens.p.size()));
  if (!bin) throw InvalidInput("load_ensemble: truncated coordinate data");
  ens.validate();
  return ens;
}

}  // namespace vds
