#include "vds/structure.hpp"

#include <algorithm>
#include <cmath>

#include "vds/legendre.hpp"

namespace vds {

namespace {

// Distinct Halton index offsets decorrelate the per-role sample streams while
// keeping everything deterministic.
constexpr std::uint64_t kOffsetXi = 1000003;
constexpr std::uint64_t kOffsetXiAlt = 2000003;
constexpr std::uint64_t kOffsetVelocity = 3000017;
constexpr std::uint64_t kOffsetTestFn = 50021;

// Full Hamiltonian of the bundle: the declared one, or the construction form
// <drift, xi> + [Psi*(z, xi - dS/2) - Psi*(z, -dS/2)] when only a dissipation
// potential is available.
Hamiltonian effective_hamiltonian(const Bundle& b) {
  if (b.hamiltonian) return *b.hamiltonian;
  if (b.dissipation) {
    const Hamiltonian h2 = hamiltonian_from_psi_star(*b.dissipation, b.S);
    const Bundle bc = b;
    Hamiltonian h;
    h.value = [bc, h2](const Vec& z, const Vec& xi) -> real {
      return bc.drift(z).dot(xi) + h2.value(z, xi);
    };
    if (h2.d_xi) {
      h.d_xi = [bc, h2](const Vec& z, const Vec& xi) -> Vec {
        return bc.drift(z) + h2.d_xi(z, xi);
      };
    }
    return h;
  }
  throw InvalidInput("Bundle '" + b.name + "': no Hamiltonian available");
}

// Dissipative part H2 = H - <drift, xi>; the reflection symmetry around dS/2
// and the construction maps apply to this part, not to the transport term.
Hamiltonian dissipative_part(const Bundle& b) {
  if (!b.hamiltonian) {
    if (b.dissipation) return hamiltonian_from_psi_star(*b.dissipation, b.S);
    throw InvalidInput("Bundle '" + b.name + "': no Hamiltonian available");
  }
  const Hamiltonian full = *b.hamiltonian;
  const Bundle bc = b;
  Hamiltonian h2;
  h2.value = [bc, full](const Vec& z, const Vec& xi) -> real {
    return full.value(z, xi) - bc.drift(z).dot(xi);
  };
  if (full.d_xi) {
    h2.d_xi = [bc, full](const Vec& z, const Vec& xi) -> Vec {
      return full.d_xi(z, xi) - bc.drift(z);
    };
  }
  return h2;
}

void require_samples(int samples, const char* check) {
  if (samples <= 0)
    throw InvalidInput(std::string(check) + ": sample count must be positive");
}

struct WorstCase {
  real residual = 0;
  std::string where;
  void update(real r, const Vec& z) {
    if (r > residual || where.empty()) {
      residual = r;
      where = format_point(z);
    }
  }
  void update(real r, const Vec& z, const Vec& xi) {
    if (r > residual || where.empty()) {
      residual = r;
      where = format_point(z, xi);
    }
  }
};

}  // namespace

Vec sample_state(const Bundle& b, std::uint64_t i) {
  if (b.state_sampler) return b.state_sampler(i);
  return b.state_box.map(HaltonSampler(b.dim).point(i));
}

Vec sample_xi(const Bundle& b, std::uint64_t i) {
  if (b.xi_sampler) return b.xi_sampler(i);
  return b.xi_box.map(HaltonSampler(b.dim, kOffsetXi).point(i));
}

Vec sample_xi_alt(const Bundle& b, std::uint64_t i) {
  if (b.xi_sampler) return b.xi_sampler(i + kOffsetXiAlt);
  return b.xi_box.map(HaltonSampler(b.dim, kOffsetXiAlt).point(i));
}

Vec sample_velocity(const Bundle& b, std::uint64_t i, const Vec& z) {
  if (b.velocity_sampler) return b.velocity_sampler(i, z);
  const Box& box = b.velocity_box ? *b.velocity_box : b.xi_box;
  return box.map(HaltonSampler(static_cast<int>(box.dim()), kOffsetVelocity).point(i));
}

DissipationPotential psi_star_from_hamiltonian(const Hamiltonian& h2, const Functional& S) {
  DissipationPotential d;
  d.psi_star = [h2, S](const Vec& z, const Vec& xi) -> real {
    const Vec half_ds = 0.5 * S.gradient(z);
    return h2.value(z, xi + half_ds) - h2.value(z, half_ds);
  };
  if (h2.d_xi) {
    d.d_xi = [h2, S](const Vec& z, const Vec& xi) -> Vec {
      const Vec half_ds = 0.5 * S.gradient(z);
      return h2.d_xi(z, xi + half_ds);
    };
  }
  return d;
}

Hamiltonian hamiltonian_from_psi_star(const DissipationPotential& d, const Functional& S) {
  Hamiltonian h;
  h.value = [d, S](const Vec& z, const Vec& xi) -> real {
    const Vec half_ds = 0.5 * S.gradient(z);
    return d.psi_star(z, xi - half_ds) - d.psi_star(z, -half_ds);
  };
  if (d.d_xi) {
    h.d_xi = [d, S](const Vec& z, const Vec& xi) -> Vec {
      const Vec half_ds = 0.5 * S.gradient(z);
      return d.d_xi(z, xi - half_ds);
    };
  }
  return h;
}

std::pair<Hamiltonian, Hamiltonian> decompose_hamiltonian(const Hamiltonian& h,
                                                          const VectorField& w) {
  Hamiltonian h1;
  h1.value = [w](const Vec& z, const Vec& xi) -> real { return w.value(z).dot(xi); };
  h1.d_xi = [w](const Vec& z, const Vec&) -> Vec { return w.value(z); };
  Hamiltonian h2;
  h2.value = [h, w](const Vec& z, const Vec& xi) -> real {
    return h.value(z, xi) - w.value(z).dot(xi);
  };
  if (h.d_xi) {
    h2.d_xi = [h, w](const Vec& z, const Vec& xi) -> Vec { return h.d_xi(z, xi) - w.value(z); };
  }
  return {h1, h2};
}

CheckReport check_construction_round_trip(const Bundle& b, int samples) {
  require_samples(samples, "construction-round-trip");
  if (!b.hamiltonian || !b.dissipation)
    return CheckReport::not_applicable("construction-round-trip",
                                       "requires both a Hamiltonian and a dissipation potential");
  const Hamiltonian h2 = dissipative_part(b);
  const DissipationPotential derived_psi = psi_star_from_hamiltonian(h2, b.S);
  const Hamiltonian derived_h2 = hamiltonian_from_psi_star(*b.dissipation, b.S);
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec xi = sample_xi(b, static_cast<std::uint64_t>(i));
    const real r1 = std::fabs(derived_psi.psi_star(z, xi) - b.dissipation->psi_star(z, xi));
    const real r2 = std::fabs(derived_h2.value(z, xi) - h2.value(z, xi));
    wc.update(std::max(r1, r2), z, xi);
  }
  return CheckReport::make("construction-round-trip", wc.residual, b.tol_struct(), samples,
                           wc.where, "exact");
}

CheckReport check_reversibility(const Bundle& b, int samples) {
  require_samples(samples, "hamiltonian-reversibility");
  const Hamiltonian h = dissipative_part(b);
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec xi = sample_xi(b, static_cast<std::uint64_t>(i));
    const Vec ds = b.S.gradient(z);
    const real r = std::fabs(h.value(z, xi) - h.value(z, ds - xi));
    wc.update(r, z, xi);
  }
  return CheckReport::make("hamiltonian-reversibility", wc.residual, b.tol_struct(), samples,
                           wc.where);
}

CheckReport check_psi_star_symmetry(const Bundle& b, int samples) {
  require_samples(samples, "psi-star-symmetry");
  if (!b.dissipation)
    return CheckReport::not_applicable("psi-star-symmetry", "no dissipation potential declared");
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec xi = sample_xi(b, static_cast<std::uint64_t>(i));
    const real r =
        std::fabs(b.dissipation->psi_star(z, xi) - b.dissipation->psi_star(z, Vec(-xi)));
    wc.update(r, z, xi);
  }
  return CheckReport::make("psi-star-symmetry", wc.residual, b.tol_struct(), samples, wc.where);
}

CheckReport check_fluctuation_symmetry(const Bundle& b, int samples) {
  require_samples(samples, "fluctuation-symmetry");
  if (!b.lagrangian)
    return CheckReport::not_applicable("fluctuation-symmetry", "no Lagrangian declared");
  WorstCase wc;
  long used = 0, skipped = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec w = b.drift(z);
    const Vec v = sample_velocity(b, static_cast<std::uint64_t>(i), z);
    const real lp = b.lagrangian->value(z, w + v);
    const real lm = b.lagrangian->value(z, w - v);
    if (!is_finite(lp) || !is_finite(lm)) {
      ++skipped;
      continue;
    }
    ++used;
    const real r = std::fabs(lp - lm - b.S.gradient(z).dot(v));
    wc.update(r, z, v);
  }
  if (used == 0)
    return CheckReport::not_applicable("fluctuation-symmetry",
                                       "all sampled velocities left the Lagrangian domain");
  CheckReport rep = CheckReport::make("fluctuation-symmetry", wc.residual, b.tol_struct(), used,
                                      wc.where);
  if (skipped > 0) rep.note = std::to_string(skipped) + " infinite-Lagrangian samples skipped";
  return rep;
}

CheckReport check_orthogonality(const Bundle& b, int samples) {
  require_samples(samples, "drift-orthogonality");
  if (!b.W)
    return CheckReport::not_applicable("drift-orthogonality", "no declared drift field");
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    wc.update(std::fabs(b.W->value(z).dot(b.S.gradient(z))), z);
  }
  return CheckReport::make("drift-orthogonality", wc.residual, b.tol_struct(), samples, wc.where);
}

CheckReport check_degeneracy_L(const Bundle& b, int samples) {
  require_samples(samples, "operator-degeneracy");
  if (!b.L) return CheckReport::not_applicable("operator-degeneracy", "no operator declared");
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    wc.update(b.L->apply(z, b.S.gradient(z)).lpNorm<Eigen::Infinity>(), z);
  }
  return CheckReport::make("operator-degeneracy", wc.residual, b.tol_struct(), samples, wc.where);
}

CheckReport check_degeneracy_psi(const Bundle& b, int samples) {
  require_samples(samples, "psi-star-degeneracy");
  if (!b.E || !b.dissipation)
    return CheckReport::not_applicable("psi-star-degeneracy",
                                       "requires E and a dissipation potential");
  static const real alphas[] = {1.0, -1.0, 0.5, -0.5, 0.1, -0.1};
  WorstCase wc;
  long count = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec xi = sample_xi(b, static_cast<std::uint64_t>(i));
    const Vec de = b.E->gradient(z);
    const real base = b.dissipation->psi_star(z, xi);
    for (real a : alphas) {
      ++count;
      const real r = std::fabs(b.dissipation->psi_star(z, xi + a * de) - base);
      wc.update(r, z, xi);
    }
  }
  CheckReport rep = CheckReport::make("psi-star-degeneracy", wc.residual, b.tol_struct(), count,
                                      wc.where);
  rep.note = "shifts along dE with factors {+-1, +-0.5, +-0.1}";
  return rep;
}

CheckReport check_antisymmetry(const Bundle& b, int samples) {
  require_samples(samples, "operator-antisymmetry");
  if (!b.L) return CheckReport::not_applicable("operator-antisymmetry", "no operator declared");
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec xi = sample_xi(b, static_cast<std::uint64_t>(i));
    const Vec eta = sample_xi_alt(b, static_cast<std::uint64_t>(i));
    const real r =
        std::fabs(b.L->apply(z, xi).dot(eta) + b.L->apply(z, eta).dot(xi));
    wc.update(r, z, xi);
  }
  return CheckReport::make("operator-antisymmetry", wc.residual, b.tol_struct(), samples,
                           wc.where);
}

std::array<Functional, 3> cubic_test_triple(int dim, std::uint64_t index) {
  std::array<Functional, 3> out;
  for (int t = 0; t < 3; ++t) {
    HaltonSampler hs(dim, kOffsetTestFn + 1000 * static_cast<std::uint64_t>(t));
    const Box coeff = Box::cube(dim, -1.0, 1.0);
    const Vec a = coeff.map(hs.point(3 * index));
    const Vec b = coeff.map(hs.point(3 * index + 1));
    const Vec c = coeff.map(hs.point(3 * index + 2));
    Functional f;
    f.value = [a, b, c](const Vec& z) -> real {
      const real bz = b.dot(z), cz = c.dot(z);
      return a.dot(z) + bz * bz + cz * cz * cz;
    };
    f.grad = [a, b, c](const Vec& z) -> Vec {
      const real bz = b.dot(z), cz = c.dot(z);
      return a + 2.0 * bz * b + 3.0 * cz * cz * c;
    };
    f.hess = [b, c](const Vec& z) -> Mat {
      const real cz = c.dot(z);
      return 2.0 * b * b.transpose() + 6.0 * cz * c * c.transpose();
    };
    out[static_cast<std::size_t>(t)] = std::move(f);
  }
  return out;
}

namespace {

// Gradient of the bracket {F,G}(z) = <dF, L dG>, assembled from analytic
// Hessians and the operator's state derivative.
Vec bracket_gradient(const Bundle& b, const Functional& F, const Functional& G, const Vec& z) {
  const Vec dF = F.grad(z), dG = G.grad(z);
  const Mat HF = F.hess(z), HG = G.hess(z);
  const Vec LdG = b.L->apply(z, dG);
  Vec out(b.dim);
  for (int k = 0; k < b.dim; ++k) {
    out[k] = HF.col(k).dot(LdG) + dF.dot(b.L->partial(z, k, dG)) +
             dF.dot(b.L->apply(z, HG.col(k)));
  }
  return out;
}

real jacobi_cyclic_residual(const Bundle& b, const Functional& F, const Functional& G,
                            const Functional& K, const Vec& z) {
  const auto outer = [&](const Functional& A, const Functional& B, const Functional& C) -> real {
    // {{A,B},C}
    return bracket_gradient(b, A, B, z).dot(b.L->apply(z, C.grad(z)));
  };
  return std::fabs(outer(F, G, K) + outer(K, F, G) + outer(G, K, F));
}

}  // namespace

CheckReport check_jacobi_with(const Bundle& b, const Functional& f1, const Functional& f2,
                              const Functional& f3, int n_states) {
  require_samples(n_states, "jacobi-identity");
  if (!b.L) return CheckReport::not_applicable("jacobi-identity", "no operator declared");
  if (!b.L->partial)
    return CheckReport::not_applicable("jacobi-identity",
                                       "operator state-derivative not supplied");
  if (!f1.has_analytic_hess() || !f2.has_analytic_hess() || !f3.has_analytic_hess() ||
      !f1.has_analytic_grad() || !f2.has_analytic_grad() || !f3.has_analytic_grad())
    return CheckReport::not_applicable("jacobi-identity",
                                       "test functionals need analytic gradients and Hessians");
  WorstCase wc;
  for (int i = 0; i < n_states; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    wc.update(jacobi_cyclic_residual(b, f1, f2, f3, z), z);
  }
  return CheckReport::make("jacobi-identity", wc.residual, 1e-10, n_states, wc.where);
}

CheckReport check_jacobi(const Bundle& b, int n_states, int n_triples) {
  // Rule out the inapplicable cases before building test functionals: grid
  // bundles exceed the Halton prime table the triples draw from.
  if (!b.L) return CheckReport::not_applicable("jacobi-identity", "no operator declared");
  if (!b.L->partial)
    return CheckReport::not_applicable("jacobi-identity",
                                       "operator state-derivative not supplied");
  CheckReport agg;
  bool first = true;
  for (int t = 0; t < n_triples; ++t) {
    const auto triple = cubic_test_triple(b.dim, static_cast<std::uint64_t>(t));
    CheckReport r = check_jacobi_with(b, triple[0], triple[1], triple[2], n_states);
    if (r.verdict == Verdict::NotApplicable) return r;
    if (first || r.residual > agg.residual) {
      const long seen = first ? 0 : agg.sample_count;
      agg = r;
      agg.sample_count += seen;
      first = false;
    } else {
      agg.sample_count += r.sample_count;
    }
  }
  agg.note = std::to_string(n_triples) + " cubic test triples";
  agg.verdict = (agg.residual <= agg.tolerance) ? Verdict::Pass : Verdict::Fail;
  return agg;
}

Vec zero_cost_velocity(const Bundle& b, const Vec& z) {
  const Hamiltonian h = effective_hamiltonian(b);
  return h.xi_gradient(z, Vec::Zero(b.dim));
}

CheckReport check_zero_cost_consistency(const Bundle& b, int samples) {
  require_samples(samples, "zero-cost-velocity-consistency");
  // Reflection symmetry of the dissipative part links the two endpoints:
  // dH2/dxi(z, 0) = -dH2/dxi(z, dS).
  const Hamiltonian h = dissipative_part(b);
  WorstCase wc;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const Vec ds = b.S.gradient(z);
    const Vec r = h.xi_gradient(z, Vec::Zero(b.dim)) + h.xi_gradient(z, ds);
    wc.update(r.lpNorm<Eigen::Infinity>(), z);
  }
  const real tol = (b.hamiltonian && b.hamiltonian->has_analytic_d_xi()) ||
                           (!b.hamiltonian && b.dissipation &&
                            b.dissipation->has_analytic_d_xi())
                       ? b.tol_struct()
                       : kTolStructFd;
  return CheckReport::make("zero-cost-velocity-consistency", wc.residual, tol, samples, wc.where);
}

real generic_residual(const Bundle& b, const Vec& z, const Vec& v) {
  if (!b.dissipation) return kNaN;
  const Vec ds = b.S.gradient(z);
  const Vec u = v - b.drift(z);
  real psi_u = kNaN;
  if (b.dissipation->psi) {
    psi_u = b.dissipation->psi(z, u);
  } else {
    if (b.dim > 3) return kNaN;  // per-state conjugation only at low dimension
    const Box domain{b.xi_box.lo, b.xi_box.hi};
    const ScanResult sr = conjugate_scan(
        [&](const Vec& xi) { return b.dissipation->psi_star(z, xi); }, domain, 41, u);
    if (sr.boundary_only || !is_finite(sr.value)) return kNaN;
    psi_u = sr.value;
  }
  if (!is_finite(psi_u)) return kInf;
  return psi_u + b.dissipation->psi_star(z, Vec(-0.5 * ds)) + 0.5 * v.dot(ds);
}

CheckReport check_generic_residual(const Bundle& b, int samples) {
  require_samples(samples, "generic-residual");
  if (!b.dissipation)
    return CheckReport::not_applicable("generic-residual", "no dissipation potential declared");
  WorstCase wc;
  long used = 0, inconclusive = 0;
  for (int i = 0; i < samples; ++i) {
    const Vec z = sample_state(b, static_cast<std::uint64_t>(i));
    const real r = generic_residual(b, z, b.flow_velocity(z));
    if (std::isnan(r)) {
      ++inconclusive;
      continue;
    }
    ++used;
    wc.update(std::fabs(r), z);
  }
  if (used == 0)
    return CheckReport::not_applicable(
        "generic-residual", "no primal potential and per-state conjugation failed everywhere");
  real tol = b.tol_struct();
  std::string note;
  if (!b.dissipation->psi) {
    // Synthesized primal potential: accuracy limited by the covector scan.
    real h = 0;
    for (int d = 0; d < b.xi_box.dim(); ++d)
      h = std::max(h, (b.xi_box.hi[d] - b.xi_box.lo[d]) / 40.0);
    tol = tol_legendre(h);
    note = "primal potential synthesized by per-state conjugation";
  }
  CheckReport rep = CheckReport::make("generic-residual", wc.residual, tol, used, wc.where);
  rep.note = note;
  if (inconclusive > 0) {
    if (!rep.note.empty()) rep.note += "; ";
    rep.note += std::to_string(inconclusive) + " states inconclusive";
  }
  return rep;
}

std::vector<CheckReport> structure_audit(const Bundle& b, int samples) {
  b.validate();
  std::vector<CheckReport> out;
  out.push_back(check_reversibility(b, samples));
  if (b.dissipation) out.push_back(check_psi_star_symmetry(b, samples));
  if (b.hamiltonian && b.dissipation) out.push_back(check_construction_round_trip(b, samples));
  if (b.lagrangian) out.push_back(check_fluctuation_symmetry(b, samples));
  out.push_back(check_zero_cost_consistency(b, samples));
  if (b.kind == BundleKind::PreGeneric || b.kind == BundleKind::Generic) {
    out.push_back(check_orthogonality(b, samples));
  }
  if (b.L) {
    out.push_back(check_antisymmetry(b, samples));
    out.push_back(check_jacobi(b, samples));
  }
  if (b.kind == BundleKind::Generic) {
    out.push_back(check_degeneracy_L(b, samples));
    out.push_back(check_degeneracy_psi(b, samples));
  }
  out.push_back(check_generic_residual(b, samples));
  return out;
}

}  // namespace vds
