#pragma once

/*
 * A bundle packages one dynamical structure: the entropy-like driving
 * functional S, optionally a conserved functional E, an antisymmetric drift
 * W, a Poisson-type operator L, a dissipation potential pair (Psi, Psi*), a
 * Hamiltonian, and a Lagrangian, together with deterministic sampling regions
 * used by the structural checks.
 *
 * Kinds and their required pieces:
 *   GradientFlow : S and a dissipation potential (drift is zero);
 *   PreGeneric   : S, W, and a dissipation potential;
 *   Generic      : PreGeneric plus E and L;
 *   Raw          : anything goes (at least one of dissipation / hamiltonian).
 *
 * The induced evolution is  dz/dt = drift(z) + (grad_xi Psi*)(z, -dS(z)/2)
 * (extensions may pin an exact closed form via flow_override).
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "vds/errors.hpp"
#include "vds/functional.hpp"
#include "vds/numerics.hpp"

namespace vds {

enum class BundleKind { GradientFlow, PreGeneric, Generic, Raw };

inline const char* kind_name(BundleKind k) {
  switch (k) {
    case BundleKind::GradientFlow: return "gradient-flow";
    case BundleKind::PreGeneric: return "pre-GENERIC";
    case BundleKind::Generic: return "GENERIC";
    default: return "raw";
  }
}

struct Bundle {
  std::string name;
  int dim{0};
  BundleKind kind{BundleKind::Raw};

  Functional S;
  std::optional<Functional> E;
  std::optional<VectorField> W;
  std::optional<PoissonOperator> L;
  std::optional<DissipationPotential> dissipation;
  std::optional<Hamiltonian> hamiltonian;
  std::optional<Lagrangian> lagrangian;

  Box state_box, xi_box;
  std::optional<Box> velocity_box;  // fluctuation deviations; defaults to xi_box

  // Custom deterministic samplers (required when dim exceeds the Halton
  // prime table, e.g. for grid-density state spaces).
  std::function<Vec(std::uint64_t)> state_sampler;
  std::function<Vec(std::uint64_t)> xi_sampler;
  std::function<Vec(std::uint64_t, const Vec&)> velocity_sampler;

  // Exact flow pinned by a constructor (extensions use this to make
  // projection identities bitwise).
  std::function<Vec(const Vec&)> flow_override;

  bool fd_gradients{false};

  // Grid-discretized bundles carry an O(h^2) consistency error in their
  // structural identities; they pin a resolution-dependent tolerance here.
  // Zero means "use the kind-based default".
  real tol_override{0.0};

  real tol_struct() const {
    if (tol_override > 0.0) return tol_override;
    const bool fd = fd_gradients || !S.has_analytic_grad() ||
                    (E && !E->has_analytic_grad()) ||
                    (dissipation && !dissipation->has_analytic_d_xi());
    return fd ? kTolStructFd : kTolStructAnalytic;
  }

  // Antisymmetric part of the evolution: declared W, else L dE, else zero.
  Vec drift(const Vec& z) const {
    if (W) return W->value(z);
    if (L && E) return L->apply(z, E->gradient(z));
    return Vec::Zero(dim);
  }

  Vec flow_velocity(const Vec& z) const {
    if (flow_override) return flow_override(z);
    if (dissipation) {
      const Vec xi = -0.5 * S.gradient(z);
      return drift(z) + dissipation->xi_gradient(z, xi);
    }
    if (hamiltonian) return hamiltonian->xi_gradient(z, Vec::Zero(dim));
    throw InvalidInput("Bundle '" + name + "': no dissipation or Hamiltonian to induce a flow");
  }

  void validate() const {
    if (dim < 1) throw InvalidInput("Bundle: positive dimension required");
    if (!S.value) throw InvalidInput("Bundle: S is required");
    if (!dissipation && !hamiltonian)
      throw InvalidInput("Bundle: at least one of dissipation / hamiltonian is required");
    switch (kind) {
      case BundleKind::PreGeneric:
        if (!W || !dissipation)
          throw InvalidInput("Bundle: pre-GENERIC requires S, W, and a dissipation potential");
        break;
      case BundleKind::Generic:
        if (!W && !(L && E))
          throw InvalidInput("Bundle: GENERIC requires an antisymmetric drift (W or L,E)");
        if (!E || !L || !dissipation)
          throw InvalidInput("Bundle: GENERIC requires S, E, L, and a dissipation potential");
        break;
      default:
        break;
    }
    if (!state_sampler) {
      state_box.validate();
      if (state_box.dim() != dim) throw InvalidInput("Bundle: state_box dimension mismatch");
    }
    if (!xi_sampler) {
      xi_box.validate();
      if (xi_box.dim() != dim) throw InvalidInput("Bundle: xi_box dimension mismatch");
    }
    if (dim > 20 && (!state_sampler || !xi_sampler))
      throw InvalidInput("Bundle: high-dimensional bundles must provide custom samplers");
  }
};

}  // namespace vds
