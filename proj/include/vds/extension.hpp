#pragma once

/*
 * Embeddings that turn a bundle with an orthogonal drift into one carrying a
 * full operator structure on a state space with one extra scalar slot:
 *
 *  - hat_extend: adjoins an auxiliary scalar a with E(z,a)=a, keeps S and
 *    Psi* untouched, and supplies the operator
 *        L(z)(xi,r) = (r W(z), -<W(z),xi>),
 *    whose degeneracies hold exactly when <W,dS>=0; the scalar is frozen
 *    along the flow.
 *
 *  - bar_extend: adjoins a reservoir scalar e with E(z,e)=E(z)+e and
 *    S(z,e)=S(z)-(E(z)+e), reuses the base operator as a block, and tilts
 *    the dual potential, Psi*((z,e),(xi,r)) = Psi*(z, xi - r dE(z)); the
 *    flow feeds -<dE, dz/dt> into e, so the total energy is a constant of
 *    motion.
 *
 *  - interpolate_extend(alpha): the family with operator
 *        (alpha L(z) xi + (1-alpha) r W(z), -(1-alpha)<W(z),xi>)
 *    and entropy S - alpha(E+e), matching the bar construction at alpha=1
 *    and the drift-block construction at alpha=0.
 *
 * Preconditions are checked numerically on the base bundle and violations
 * refuse with a diagnostic (drift/entropy orthogonality for hat; operator
 * antisymmetry, L(dS-dE)=0, W=L dE consistency, and the Jacobi identity for
 * bar and the interpolation).
 */

#include "vds/bundle.hpp"

namespace vds {

Bundle hat_extend(const Bundle& base);
Bundle bar_extend(const Bundle& base);
Bundle interpolate_extend(const Bundle& base, real alpha);

}  // namespace vds
