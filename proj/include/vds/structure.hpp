#pragma once

/*
 * Structural operations and identity checks on bundles:
 *
 *  - construction maps between dissipation potentials and Hamiltonians,
 *      Psi*(z,xi) = H2(z, xi + dS/2) - H2(z, dS/2)
 *      H(z,xi)    = Psi*(z, xi - dS/2) - Psi*(z, -dS/2),
 *    mutually inverse whenever Psi*(z,0)=0;
 *  - sampled identity checks: Hamiltonian reflection symmetry around dS/2,
 *    evenness of Psi*, Lagrangian fluctuation symmetry, drift/entropy
 *    orthogonality, operator degeneracies, antisymmetry, the Jacobi triple
 *    bracket with cubic test functionals, zero-cost velocity consistency,
 *    and the variational (generic) residual along the induced flow;
 *  - a kind-appropriate audit composing the above.
 *
 * All sampling is deterministic (Halton, or the bundle's declared samplers);
 * every check returns a CheckReport with residual, pinned tolerance, sample
 * count, and worst-case location.
 */

#include <array>
#include <utility>
#include <vector>

#include "vds/bundle.hpp"
#include "vds/check.hpp"

namespace vds {

inline constexpr int kDefaultSamples = 256;

// Deterministic sample streams (custom samplers take precedence).
Vec sample_state(const Bundle& b, std::uint64_t i);
Vec sample_xi(const Bundle& b, std::uint64_t i);
Vec sample_xi_alt(const Bundle& b, std::uint64_t i);
Vec sample_velocity(const Bundle& b, std::uint64_t i, const Vec& z);

DissipationPotential psi_star_from_hamiltonian(const Hamiltonian& h2, const Functional& S);
Hamiltonian hamiltonian_from_psi_star(const DissipationPotential& d, const Functional& S);
std::pair<Hamiltonian, Hamiltonian> decompose_hamiltonian(const Hamiltonian& h,
                                                          const VectorField& w);

// Mutual-inversion residual of the two construction maps, evaluated on
// bundles declaring both a Hamiltonian and a dissipation potential.
CheckReport check_construction_round_trip(const Bundle& b, int samples = kDefaultSamples);

CheckReport check_reversibility(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_psi_star_symmetry(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_fluctuation_symmetry(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_orthogonality(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_degeneracy_L(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_degeneracy_psi(const Bundle& b, int samples = kDefaultSamples);
CheckReport check_antisymmetry(const Bundle& b, int samples = kDefaultSamples);

// Cubic test functionals F(z) = <a,z> + <b,z>^2 + <c,z>^3 with analytic
// gradients and Hessians; coefficient vectors are Halton-deterministic.
std::array<Functional, 3> cubic_test_triple(int dim, std::uint64_t index);
CheckReport check_jacobi_with(const Bundle& b, const Functional& f1, const Functional& f2,
                              const Functional& f3, int n_states = kDefaultSamples);
CheckReport check_jacobi(const Bundle& b, int n_states = kDefaultSamples, int n_triples = 4);

Vec zero_cost_velocity(const Bundle& b, const Vec& z);
CheckReport check_zero_cost_consistency(const Bundle& b, int samples = kDefaultSamples);

// Variational residual Psi(z, v - drift) + Psi*(z, -dS/2) + <v, dS>/2.
// Returns NaN when no primal potential is available and per-state conjugation
// of Psi* fails (maximizer escapes the covector box).
real generic_residual(const Bundle& b, const Vec& z, const Vec& v);
CheckReport check_generic_residual(const Bundle& b, int samples = kDefaultSamples);

std::vector<CheckReport> structure_audit(const Bundle& b, int samples = kDefaultSamples);

}  // namespace vds
