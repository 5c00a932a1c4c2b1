#include "vds/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace vds {

namespace {

constexpr real kDensityFloor = 1e-300;  // cells below this count as empty
constexpr real kTaintedClipBudget = 1e-6;

real clamp_nonneg(real x) { return x > 0.0 ? x : 0.0; }

std::string format_real(real x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

GridDensity unchecked_density(const PhaseGrid& grid, Vec mass) {
  GridDensity rho;
  rho.grid = grid;
  rho.mass = std::move(mass);
  return rho;
}

CheckReport make_report(const char* name, real residual, real tol, const char* order) {
  return CheckReport::make(name, residual, tol, 1, "", order);
}

// d(rho)/dt right-hand side on a raw density vector (intermediate RK4 states
// may dip slightly negative; all weights clamp at zero).
Vec kinetic_rhs(const KineticBundle& kb, const Vec& mass) {
  const GridDensity rho = unchecked_density(kb.grid, mass);
  return transport_field(kb, rho) + dissipation_field(kb, rho);
}

}  // namespace

const char* mechanism_name(Mechanism mech) {
  return mech == Mechanism::Andersen ? "andersen" : "vfp";
}

// ---------------------------------------------------------------------------
// Types.
// ---------------------------------------------------------------------------

void PhaseGrid::validate() const {
  if (nq < 8 || np < 8) throw InvalidInput("PhaseGrid: at least 8 points per axis required");
  if (!(q_max > q_min)) throw InvalidInput("PhaseGrid: empty position axis");
  if (!(p_max > 0.0)) throw InvalidInput("PhaseGrid: momentum half-width must be positive");
}

real GridDensity::total_mass() const { return mass.sum() * grid.cell_volume(); }

void GridDensity::validate() const {
  grid.validate();
  if (static_cast<int>(mass.size()) != grid.size())
    throw InvalidInput("GridDensity: value count does not match the grid");
  if (!mass.allFinite()) throw InvalidInput("GridDensity: non-finite density value");
  if ((mass.array() < 0.0).any()) throw InvalidInput("GridDensity: negative density value");
  const real total = total_mass();
  if (std::fabs(total - 1.0) > 1e-10)
    throw InvalidInput("GridDensity: total mass " + format_real(total) + " is not 1 within 1e-10");
}

void KineticBundle::finalize() {
  grid.validate();
  Vec raw(grid.np);
  for (int j = 0; j < grid.np; ++j) {
    const real p = grid.p(j);
    raw[j] = std::exp(-p * p / (2.0 * m));
  }
  maxwellian = raw / (raw.sum() * grid.h_p());
  validate();
}

void KineticBundle::validate() const {
  grid.validate();
  if (!(m > 0.0)) throw InvalidInput("KineticBundle: mass parameter must be positive");
  if (!(gamma > 0.0)) throw InvalidInput("KineticBundle: dissipation intensity must be positive");
  if (static_cast<int>(V.size()) != grid.nq)
    throw InvalidInput("KineticBundle: external potential must be sampled at the q nodes");
  if (static_cast<int>(Phi.size()) != grid.nq)
    throw InvalidInput("KineticBundle: interaction potential must be sampled at the q nodes");
  if (!V.allFinite() || !Phi.allFinite())
    throw InvalidInput("KineticBundle: potentials must be finite");
  for (int k = 0; k < grid.nq; ++k) {
    const int mirror = (grid.nq - k) % grid.nq;
    if (std::fabs(Phi[k] - Phi[mirror]) > 1e-12 * (1.0 + std::fabs(Phi[k])))
      throw InvalidInput("KineticBundle: interaction potential must be symmetric");
  }
  if (static_cast<int>(maxwellian.size()) != grid.np)
    throw InvalidInput("KineticBundle: finalize() must fill the thermal weight");
  // Mass of the continuum thermal measure outside the grid.
  const real outside = std::erfc(grid.p_max / std::sqrt(2.0 * m));
  if (outside > 1e-8)
    throw InvalidInput("KineticBundle: momentum domain too narrow (thermal mass outside " +
                       format_real(outside) + " exceeds 1e-8)");
}

KineticBundle make_kinetic_bundle(Mechanism mech, int nq, int np, real m, real gamma) {
  KineticBundle kb;
  kb.grid.nq = nq;
  kb.grid.np = np;
  kb.grid.q_min = -8.0;
  kb.grid.q_max = 8.0;
  kb.grid.p_max = 8.0 * std::sqrt(m);
  kb.mechanism = mech;
  kb.m = m;
  kb.gamma = gamma;
  kb.V = Vec(nq);
  for (int i = 0; i < nq; ++i) {
    const real q = kb.grid.q(i);
    kb.V[i] = 0.5 * q * q;
  }
  kb.Phi = Vec::Zero(nq);
  kb.finalize();
  return kb;
}

// ---------------------------------------------------------------------------
// Densities.
// ---------------------------------------------------------------------------

GridDensity uniform_density(const PhaseGrid& grid) {
  grid.validate();
  GridDensity rho;
  rho.grid = grid;
  rho.mass = Vec::Constant(grid.size(), 1.0 / (grid.size() * grid.cell_volume()));
  return rho;
}

GridDensity maxwellian_uniform_density(const KineticBundle& kb) {
  const PhaseGrid& g = kb.grid;
  Vec mass(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) mass[g.idx(i, j)] = kb.maxwellian[j];
  mass /= mass.sum() * g.cell_volume();
  return unchecked_density(g, mass);
}

GridDensity gibbs_density(const KineticBundle& kb) {
  const PhaseGrid& g = kb.grid;
  // Interaction-free profile first; then self-consistent refinement (a no-op
  // when Phi = 0).
  Vec mass(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) {
      const real p = g.p(j);
      mass[g.idx(i, j)] = std::exp(-(p * p / (2.0 * kb.m) + kb.V[i]));
    }
  mass /= mass.sum() * g.cell_volume();
  for (int pass = 0; pass < 64; ++pass) {
    const GridDensity current = unchecked_density(g, mass);
    const Vec de = energy_gradient_field(kb, current);
    Vec next(g.size());
    for (int c = 0; c < g.size(); ++c) next[c] = std::exp(-de[c]);
    next /= next.sum() * g.cell_volume();
    const real change = (next - mass).cwiseAbs().sum() * g.cell_volume();
    mass = next;
    if (change <= 1e-14) break;
  }
  return unchecked_density(g, mass);
}

GridDensity sample_smooth_density(const KineticBundle& kb, std::uint64_t index) {
  const PhaseGrid& g = kb.grid;
  const real u1 = halton(index + 1, 2), u2 = halton(index + 1, 3), u3 = halton(index + 1, 5),
             u4 = halton(index + 1, 7), u5 = halton(index + 1, 11);
  const real qc = -2.0 + 4.0 * u1;
  const real pc = -1.5 + 3.0 * u2;
  const real sq = 0.6 + 0.8 * u3;
  const real sp = 0.6 + 0.8 * u4;
  const real amp = 0.3 * u5;
  const real waves = 1.0 + static_cast<real>(index % 2);
  const real length = g.q_max - g.q_min;
  Vec mass(g.size());
  for (int i = 0; i < g.nq; ++i) {
    const real q = g.q(i);
    const real tilt = 1.0 + amp * std::sin(2.0 * kPi * waves * (q - g.q_min) / length);
    const real gq = std::exp(-(q - qc) * (q - qc) / (2.0 * sq * sq));
    for (int j = 0; j < g.np; ++j) {
      const real p = g.p(j);
      mass[g.idx(i, j)] =
          gq * tilt * std::exp(-(p - pc) * (p - pc) / (2.0 * sp * sp)) + 1e-8;
    }
  }
  mass /= mass.sum() * g.cell_volume();
  return unchecked_density(g, mass);
}

Vec sample_xi_field(const PhaseGrid& grid, std::uint64_t index) {
  const real c1 = 2.0 * halton(index + 1, 2) - 1.0, c2 = 2.0 * halton(index + 1, 3) - 1.0,
             c3 = 2.0 * halton(index + 1, 5) - 1.0, c4 = 2.0 * halton(index + 1, 7) - 1.0;
  const real length = grid.q_max - grid.q_min;
  Vec xi(grid.size());
  for (int i = 0; i < grid.nq; ++i) {
    const real s = (grid.q(i) - grid.q_min) / length;
    for (int j = 0; j < grid.np; ++j) {
      const real t = grid.p(j) / grid.p_max;
      xi[grid.idx(i, j)] = c1 * std::sin(2.0 * kPi * s) + c2 * std::cos(4.0 * kPi * s) + c3 * t +
                           c4 * t * t + 0.5 * c1 * c4 * std::sin(2.0 * kPi * s) * t;
    }
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Functionals.
// ---------------------------------------------------------------------------

Vec interaction_field(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  Vec qmass(g.nq);
  for (int i = 0; i < g.nq; ++i) {
    real s = 0.0;
    for (int j = 0; j < g.np; ++j) s += rho.mass[g.idx(i, j)];
    qmass[i] = s * g.h_p();
  }
  Vec conv = Vec::Zero(g.nq);
  if (kb.Phi.cwiseAbs().maxCoeff() == 0.0) return conv;
  for (int i = 0; i < g.nq; ++i) {
    real s = 0.0;
    for (int k = 0; k < g.nq; ++k) s += kb.Phi[(i - k + g.nq) % g.nq] * qmass[k];
    conv[i] = s * g.h_q();
  }
  return conv;
}

Vec energy_gradient_field(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  const Vec conv = interaction_field(kb, rho);
  Vec de(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) {
      const real p = g.p(j);
      de[g.idx(i, j)] = p * p / (2.0 * kb.m) + kb.V[i] + conv[i];
    }
  return de;
}

real kinetic_energy(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  const Vec conv = interaction_field(kb, rho);
  real acc = 0.0;
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) {
      const real p = g.p(j);
      acc += (p * p / (2.0 * kb.m) + kb.V[i] + 0.5 * conv[i]) * rho.mass[g.idx(i, j)];
    }
  return acc * g.cell_volume();
}

Vec entropy_gradient_field(const KineticBundle& kb, const GridDensity& rho) {
  Vec ds = energy_gradient_field(kb, rho);
  for (int c = 0; c < kb.grid.size(); ++c)
    ds[c] += std::log(std::max(rho.mass[c], kDensityFloor)) + 1.0;
  return ds;
}

real kinetic_entropy(const KineticBundle& kb, const GridDensity& rho) {
  real acc = 0.0;
  for (int c = 0; c < kb.grid.size(); ++c) {
    const real v = rho.mass[c];
    if (v > kDensityFloor) acc += v * std::log(v);
  }
  return acc * kb.grid.cell_volume() + kinetic_energy(kb, rho);
}

// ---------------------------------------------------------------------------
// Operators.
// ---------------------------------------------------------------------------

Vec poisson_apply(const KineticBundle& kb, const GridDensity& rho, const Vec& xi) {
  const PhaseGrid& g = kb.grid;
  if (static_cast<int>(xi.size()) != g.size())
    throw InvalidInput("poisson_apply: cotangent field size mismatch");
  const int nq = g.nq, np = g.np;
  const real hq2 = 2.0 * g.h_q(), hp2 = 2.0 * g.h_p();
  // Log-mean weighted centered differences of xi; the p-direction flux is
  // forced to zero on the outermost momentum rows.
  Vec gp = Vec::Zero(g.size()), gq(g.size());
  for (int i = 0; i < nq; ++i) {
    const int ip = (i + 1) % nq, im = (i + nq - 1) % nq;
    for (int j = 0; j < np; ++j) {
      const int c = g.idx(i, j);
      if (j >= 1 && j <= np - 2)
        gp[c] = log_mean(rho.mass[g.idx(i, j + 1)], rho.mass[g.idx(i, j - 1)]) *
                (xi[g.idx(i, j + 1)] - xi[g.idx(i, j - 1)]) / hp2;
      gq[c] = log_mean(rho.mass[g.idx(ip, j)], rho.mass[g.idx(im, j)]) *
              (xi[g.idx(ip, j)] - xi[g.idx(im, j)]) / hq2;
    }
  }
  Vec out = Vec::Zero(g.size());
  for (int i = 0; i < nq; ++i) {
    const int ip = (i + 1) % nq, im = (i + nq - 1) % nq;
    for (int j = 1; j <= np - 2; ++j)
      out[g.idx(i, j)] = -(gp[g.idx(ip, j)] - gp[g.idx(im, j)]) / hq2 +
                         (gq[g.idx(i, j + 1)] - gq[g.idx(i, j - 1)]) / hp2;
  }
  return out;
}

Vec transport_field(const KineticBundle& kb, const GridDensity& rho) {
  return poisson_apply(kb, rho, energy_gradient_field(kb, rho));
}

namespace {

Vec dissipation_andersen(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  Vec out(g.size());
  for (int i = 0; i < g.nq; ++i) {
    real colmass = 0.0;
    for (int j = 0; j < g.np; ++j) colmass += rho.mass[g.idx(i, j)];
    colmass *= g.h_p();
    for (int j = 0; j < g.np; ++j) {
      const int c = g.idx(i, j);
      out[c] = kb.gamma * (kb.maxwellian[j] * colmass - rho.mass[c]);
    }
  }
  return out;
}

Vec dissipation_vfp(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  const real hp = g.h_p();
  Vec out(g.size());
  for (int i = 0; i < g.nq; ++i) {
    // Face fluxes gamma (d_p rho + rho p / m) between rows j and j+1, with
    // zero flux through the momentum boundary.
    Vec flux(g.np - 1);
    for (int j = 0; j + 1 < g.np; ++j) {
      const real lo = rho.mass[g.idx(i, j)], hi = rho.mass[g.idx(i, j + 1)];
      const real pmid = 0.5 * (g.p(j) + g.p(j + 1));
      flux[j] = kb.gamma * ((hi - lo) / hp + 0.5 * (hi + lo) * pmid / kb.m);
    }
    for (int j = 0; j < g.np; ++j) {
      const real above = (j + 1 < g.np) ? flux[j] : 0.0;
      const real below = (j > 0) ? flux[j - 1] : 0.0;
      out[g.idx(i, j)] = (above - below) / hp;
    }
  }
  return out;
}

}  // namespace

Vec dissipation_field(const KineticBundle& kb, const GridDensity& rho) {
  return kb.mechanism == Mechanism::Andersen ? dissipation_andersen(kb, rho)
                                             : dissipation_vfp(kb, rho);
}

// ---------------------------------------------------------------------------
// Dissipation potentials and Hamiltonians.
// ---------------------------------------------------------------------------

real psi_star_kinetic(const KineticBundle& kb, const GridDensity& rho, const Vec& xi) {
  const PhaseGrid& g = kb.grid;
  if (static_cast<int>(xi.size()) != g.size())
    throw InvalidInput("psi_star_kinetic: cotangent field size mismatch");
  if (kb.mechanism == Mechanism::Andersen) {
    real acc = 0.0;
    for (int i = 0; i < g.nq; ++i)
      for (int s = 0; s < g.np; ++s) {
        const real rs = clamp_nonneg(rho.mass[g.idx(i, s)]);
        if (rs == 0.0) continue;
        for (int t = 0; t < g.np; ++t) {
          if (t == s) continue;
          const real rt = clamp_nonneg(rho.mass[g.idx(i, t)]);
          if (rt == 0.0) continue;
          acc += (std::cosh(xi[g.idx(i, t)] - xi[g.idx(i, s)]) - 1.0) *
                 std::sqrt(kb.maxwellian[s] * kb.maxwellian[t]) * std::sqrt(rs * rt);
        }
      }
    return kb.gamma * acc * g.h_q() * g.h_p() * g.h_p();
  }
  const real hp2 = 2.0 * g.h_p();
  real acc = 0.0;
  for (int i = 0; i < g.nq; ++i)
    for (int j = 1; j <= g.np - 2; ++j) {
      const real d = (xi[g.idx(i, j + 1)] - xi[g.idx(i, j - 1)]) / hp2;
      acc += d * d * clamp_nonneg(rho.mass[g.idx(i, j)]);
    }
  return kb.gamma * acc * g.cell_volume();
}

Vec psi_star_gradient(const KineticBundle& kb, const GridDensity& rho, const Vec& xi) {
  const PhaseGrid& g = kb.grid;
  if (static_cast<int>(xi.size()) != g.size())
    throw InvalidInput("psi_star_gradient: cotangent field size mismatch");
  if (kb.mechanism == Mechanism::Andersen) {
    Vec out = Vec::Zero(g.size());
    for (int i = 0; i < g.nq; ++i)
      for (int j = 0; j < g.np; ++j) {
        const real rj = clamp_nonneg(rho.mass[g.idx(i, j)]);
        if (rj == 0.0) continue;
        real acc = 0.0;
        for (int s = 0; s < g.np; ++s) {
          if (s == j) continue;
          const real rs = clamp_nonneg(rho.mass[g.idx(i, s)]);
          if (rs == 0.0) continue;
          acc += std::sinh(xi[g.idx(i, j)] - xi[g.idx(i, s)]) *
                 std::sqrt(kb.maxwellian[j] * kb.maxwellian[s]) * std::sqrt(rj * rs);
        }
        out[g.idx(i, j)] = 2.0 * kb.gamma * g.h_p() * acc;
      }
    return out;
  }
  // 2 gamma D_p^T (rho . D_p xi); the weighted difference vanishes on the
  // boundary rows, so the transpose reduces to a sign-flipped shift.
  const real hp2 = 2.0 * g.h_p();
  Vec w = Vec::Zero(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 1; j <= g.np - 2; ++j)
      w[g.idx(i, j)] = clamp_nonneg(rho.mass[g.idx(i, j)]) *
                       (xi[g.idx(i, j + 1)] - xi[g.idx(i, j - 1)]) / hp2;
  Vec out(g.size());
  for (int i = 0; i < g.nq; ++i)
    for (int j = 0; j < g.np; ++j) {
      const real below = (j > 0) ? w[g.idx(i, j - 1)] : 0.0;
      const real above = (j + 1 < g.np) ? w[g.idx(i, j + 1)] : 0.0;
      out[g.idx(i, j)] = 2.0 * kb.gamma * (below - above) / hp2;
    }
  return out;
}

real jump_generator_hamiltonian(const KineticBundle& kb, const GridDensity& rho, const Vec& xi) {
  if (kb.mechanism != Mechanism::Andersen)
    throw InvalidInput("jump_generator_hamiltonian: only the jump mechanism has one");
  const PhaseGrid& g = kb.grid;
  if (static_cast<int>(xi.size()) != g.size())
    throw InvalidInput("jump_generator_hamiltonian: cotangent field size mismatch");
  real acc = 0.0;
  for (int i = 0; i < g.nq; ++i)
    for (int s = 0; s < g.np; ++s) {
      const real rs = clamp_nonneg(rho.mass[g.idx(i, s)]);
      if (rs == 0.0) continue;
      real col = 0.0;
      for (int t = 0; t < g.np; ++t) {
        if (t == s) continue;
        col += kb.maxwellian[t] * (std::exp(xi[g.idx(i, t)] - xi[g.idx(i, s)]) - 1.0);
      }
      acc += rs * col;
    }
  return kb.gamma * acc * g.h_p() * g.cell_volume();
}

real macroscopic_hamiltonian(const KineticBundle& kb, const GridDensity& rho, const Vec& xi) {
  const Vec w = transport_field(kb, rho);
  const Vec ds = entropy_gradient_field(kb, rho);
  const real coupling = (w.array() * xi.array()).sum() * kb.grid.cell_volume();
  return coupling + psi_star_kinetic(kb, rho, xi - 0.5 * ds) -
         psi_star_kinetic(kb, rho, (-0.5) * ds);
}

// ---------------------------------------------------------------------------
// Identity checks.
// ---------------------------------------------------------------------------

CheckReport check_poisson_degeneracy(const KineticBundle& kb, const GridDensity& rho) {
  const Vec ds = entropy_gradient_field(kb, rho);
  const Vec de = energy_gradient_field(kb, rho);
  const Vec residual = poisson_apply(kb, rho, ds - de);
  return make_report("kinetic-poisson-degeneracy", residual.cwiseAbs().maxCoeff(),
                     kTolKineticExact, "exact");
}

CheckReport check_transport_orthogonality(const KineticBundle& kb, const GridDensity& rho) {
  const Vec w = transport_field(kb, rho);
  const Vec ds = entropy_gradient_field(kb, rho);
  const real defect = (w.array() * ds.array()).sum() * kb.grid.cell_volume();
  return make_report("kinetic-orthogonality", std::fabs(defect), tol_kinetic(kb.grid.spacing()),
                     "h2");
}

CheckReport verify_drift_identity(const KineticBundle& kb, const GridDensity& rho) {
  const Vec ds = entropy_gradient_field(kb, rho);
  const Vec lhs = psi_star_gradient(kb, rho, (-0.5) * ds);
  const Vec rhs = dissipation_field(kb, rho);
  const real residual = (lhs - rhs).cwiseAbs().maxCoeff();
  const bool exact = kb.mechanism == Mechanism::Andersen;
  return make_report("kinetic-drift-identity", residual,
                     exact ? kTolKineticExact : tol_kinetic(kb.grid.spacing()),
                     exact ? "exact" : "h2");
}

CheckReport check_gibbs_stationarity(const KineticBundle& kb, real dt) {
  const GridDensity equilibrium = gibbs_density(kb);
  const KineticStepResult step = step_kinetic(kb, equilibrium, dt);
  const real l1 =
      (step.density.mass - equilibrium.mass).cwiseAbs().sum() * kb.grid.cell_volume();
  return make_report("kinetic-gibbs-stationarity", l1 / dt, tol_kinetic(kb.grid.spacing()),
                     "h2");
}

// ---------------------------------------------------------------------------
// Dynamics.
// ---------------------------------------------------------------------------

real cfl_bound(const KineticBundle& kb, const GridDensity& rho) {
  const PhaseGrid& g = kb.grid;
  const Vec de = energy_gradient_field(kb, rho);
  real forcemax = 0.0;
  for (int i = 0; i < g.nq; ++i) {
    const int ip = (i + 1) % g.nq, im = (i + g.nq - 1) % g.nq;
    // The force is q-only; read it off any momentum row.
    const real f = std::fabs(de[g.idx(ip, 0)] - de[g.idx(im, 0)]) / (2.0 * g.h_q());
    forcemax = std::max(forcemax, f);
  }
  real bound = g.h_q() * kb.m / g.p_max;
  if (forcemax > 0.0) bound = std::min(bound, g.h_p() / forcemax);
  if (kb.mechanism == Mechanism::Vfp)
    bound = std::min(bound, g.h_p() * g.h_p() / (2.0 * kb.gamma));
  else
    bound = std::min(bound, 1.0 / kb.gamma);
  return 0.4 * bound;
}

KineticStepResult step_kinetic(const KineticBundle& kb, const GridDensity& rho, real dt) {
  rho.validate();
  if (!(dt >= 0.0)) throw InvalidInput("step_kinetic: nonnegative step required");
  if (dt == 0.0) return {rho, 0.0, 0.0};
  const real bound = cfl_bound(kb, rho);
  if (dt > bound)
    throw NumericalRefusal("step_kinetic: step " + format_real(dt) +
                           " exceeds the stability bound " + format_real(bound));
  const Vec& z = rho.mass;
  const Vec k1 = kinetic_rhs(kb, z);
  const Vec k2 = kinetic_rhs(kb, z + (0.5 * dt) * k1);
  const Vec k3 = kinetic_rhs(kb, z + (0.5 * dt) * k2);
  const Vec k4 = kinetic_rhs(kb, z + dt * k3);
  Vec next = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  KineticStepResult result;
  real clipped = 0.0;
  for (int c = 0; c < next.size(); ++c)
    if (next[c] < 0.0) {
      clipped -= next[c];
      next[c] = 0.0;
    }
  result.clipped_mass = clipped * kb.grid.cell_volume();
  const real total = next.sum() * kb.grid.cell_volume();
  result.mass_drift = std::fabs(total - 1.0);
  next /= total;
  result.density = unchecked_density(kb.grid, std::move(next));
  return result;
}

KineticRun run_kinetic(const KineticBundle& kb, const GridDensity& rho0, long steps, real dt,
                       bool with_identity_residuals) {
  if (steps < 0) throw InvalidInput("run_kinetic: nonnegative step count required");
  rho0.validate();
  KineticRun run;
  run.rows.reserve(static_cast<std::size_t>(steps) + 1);
  GridDensity current = rho0;
  real t = 0.0, drift = 0.0, clipped = 0.0;
  for (long k = 0;; ++k) {
    KineticMonitorRow row;
    row.t = t;
    row.mass_drift = drift;
    row.clipped_mass = clipped;
    row.entropy = kinetic_entropy(kb, current);
    row.energy = kinetic_energy(kb, current);
    const Vec w = transport_field(kb, current);
    const Vec ds = entropy_gradient_field(kb, current);
    const Vec de = energy_gradient_field(kb, current);
    row.orthogonality = (w.array() * ds.array()).sum() * kb.grid.cell_volume();
    row.poisson_residual = poisson_apply(kb, current, ds - de).cwiseAbs().maxCoeff();
    row.drift_residual =
        with_identity_residuals
            ? (psi_star_gradient(kb, current, (-0.5) * ds) - dissipation_field(kb, current))
                  .cwiseAbs()
                  .maxCoeff()
            : kNaN;
    run.rows.push_back(row);
    if (k == steps) break;
    const KineticStepResult step = step_kinetic(kb, current, dt);
    current = step.density;
    t = (k + 1) * dt;
    drift = step.mass_drift;
    clipped = step.clipped_mass;
    run.cumulative_clipped += clipped;
  }
  run.tainted = run.cumulative_clipped > kTaintedClipBudget;
  run.final_density = std::move(current);
  return run;
}

// ---------------------------------------------------------------------------
// Structure-bundle wrap.
// ---------------------------------------------------------------------------

Bundle make_kinetic_structure_bundle(const KineticBundle& kb) {
  kb.validate();
  const auto shared = std::make_shared<const KineticBundle>(kb);
  const PhaseGrid grid = kb.grid;
  const int n = grid.size();
  const real vol = grid.cell_volume();
  const auto density = [grid](const Vec& z) { return unchecked_density(grid, z); };

  Bundle b;
  b.name = std::string(mechanism_name(kb.mechanism)) + "-kinetic";
  b.dim = n;
  b.kind = BundleKind::PreGeneric;
  b.tol_override = tol_kinetic(grid.spacing());

  b.S.value = [shared, density](const Vec& z) { return kinetic_entropy(*shared, density(z)); };
  b.S.grad = [shared, density, vol](const Vec& z) -> Vec {
    return vol * entropy_gradient_field(*shared, density(z));
  };
  Functional energy;
  energy.value = [shared, density](const Vec& z) { return kinetic_energy(*shared, density(z)); };
  energy.grad = [shared, density, vol](const Vec& z) -> Vec {
    return vol * energy_gradient_field(*shared, density(z));
  };
  b.E = energy;

  VectorField w;
  w.value = [shared, density](const Vec& z) -> Vec { return transport_field(*shared, density(z)); };
  b.W = w;

  PoissonOperator op;
  op.apply = [shared, density, vol](const Vec& z, const Vec& xi) -> Vec {
    return poisson_apply(*shared, density(z), xi / vol);
  };
  b.L = op;

  DissipationPotential d;
  d.psi_star = [shared, density, vol](const Vec& z, const Vec& xi) {
    return psi_star_kinetic(*shared, density(z), xi / vol);
  };
  d.d_xi = [shared, density, vol](const Vec& z, const Vec& xi) -> Vec {
    return psi_star_gradient(*shared, density(z), xi / vol);
  };
  // The primal potential is only known in closed form at the dissipative
  // part of the induced flow (where Fenchel equality holds) and at zero.
  d.psi = [shared, density, vol](const Vec& z, const Vec& u) {
    const GridDensity rho = density(z);
    const Vec xi_opt = (-0.5) * entropy_gradient_field(*shared, rho);
    const Vec u_opt = psi_star_gradient(*shared, rho, xi_opt);
    const real gate = 1e-9 * (1.0 + u.lpNorm<Eigen::Infinity>());
    if ((u - u_opt).lpNorm<Eigen::Infinity>() <= gate)
      return (u_opt.array() * xi_opt.array()).sum() * vol -
             psi_star_kinetic(*shared, rho, xi_opt);
    if (u.lpNorm<Eigen::Infinity>() <= 1e-15) return 0.0;
    return kInf;
  };
  b.dissipation = d;

  b.flow_override = [shared, density](const Vec& z) -> Vec {
    const GridDensity rho = density(z);
    const Vec ds = entropy_gradient_field(*shared, rho);
    return transport_field(*shared, rho) + psi_star_gradient(*shared, rho, (-0.5) * ds);
  };

  b.state_sampler = [shared](std::uint64_t i) -> Vec {
    return sample_smooth_density(*shared, i).mass;
  };
  b.xi_sampler = [grid, vol](std::uint64_t i) -> Vec {
    return vol * sample_xi_field(grid, i + 101);
  };
  b.velocity_sampler = [shared, grid, density](std::uint64_t i, const Vec& z) -> Vec {
    return poisson_apply(*shared, density(z), sample_xi_field(grid, i + 211));
  };

  b.validate();
  return b;
}

}  // namespace vds
