#pragma once

/*
 * Built-in analytic bundles.  Every formula here was derived by hand and is
 * cross-checked in the test suite:
 *
 *  - quadratic_1d: S=z^2, Psi*=xi^2/2, H=xi^2/2 - z*xi, exact Lagrangian
 *    (u+z)^2/2; the flow is dz/dt=-z.
 *  - cosh_1d: S=z^2, Psi*=cosh(xi)-1, H=cosh(xi-z)-cosh(z), primal potential
 *    v*asinh(v)-sqrt(1+v^2)+1; the flow is dz/dt=-sinh(z).
 *  - rotation: S=E=|z|^2/2, W=(z2,-z1), L=[[0,1],[-1,0]], Psi*=|xi|^2/2;
 *    drift and entropy gradient are exactly orthogonal.
 *  - oscillator_base: states (q,p), S=E=p^2/2m+k q^2/2, W=(p/m,-kq),
 *    Psi*=gamma xi_p^2; the flow is the damped harmonic oscillator.
 *  - damped_oscillator: states (q,p,e) with S=-e, E=p^2/2m+k q^2/2+e,
 *    L the canonical block extended by zero, Psi*=gamma (xi_p - (p/m) xi_e)^2;
 *    conserves E exactly along the flow and dissipates S.
 *
 * The deliberately broken variants (sign-flipped Hamiltonian coupling;
 * an operator violating the Jacobi identity with cyclic residual exactly z1
 * on linear test functions) exist so that every detector demonstrably fires;
 * they are not part of the CLI catalog.
 */

#include "vds/bundle.hpp"

namespace vds {

Bundle make_quadratic_1d();
Bundle make_cosh_1d();
Bundle make_rotation();
Bundle make_oscillator_base(real m = 1.0, real gamma = 1.0, real k = 1.0);
Bundle make_damped_oscillator(real m = 1.0, real gamma = 1.0, real k = 1.0);

// Sign-broken Hamiltonian H = xi^2/2 + z*xi on the quadratic bundle, with the
// bundle's original dissipation pair retained and the flow induced by the
// broken Hamiltonian's zero-cost velocity.
Bundle make_sign_broken_quadratic();
// Same corruption, but carrying the dissipation potential derived from the
// broken Hamiltonian (its evenness check must fail).
Bundle make_sign_broken_quadratic_derived_psi();

// Three-dimensional operator L(z) = [[0,z2,0],[-z2,0,z1],[0,-z1,0]]:
// antisymmetric but with Jacobi cyclic residual z1 on linear test functions.
Bundle make_broken_jacobi_bundle();

}  // namespace vds
