#pragma once

/*
 * Grid Legendre transform (convex conjugation) on sampled functions.
 *
 * conjugate(f, dual_grid) computes g(xi) = max over grid nodes v of
 * <v,xi> - f(v).  A dual value is recorded as +infinity exactly when every
 * maximizing node lies on the boundary of the primal box (the finite grid can
 * then not certify a finite supremum).  Dimensions up to 3 are supported
 * through exhaustive search; dimension 1 additionally uses a convex-hull /
 * two-pointer fast path that agrees bitwise with the exhaustive reference.
 * Declared-separable inputs of any supported dimension are conjugated
 * axis-by-axis.
 *
 * biconjugate_check(f) conjugates twice with an automatically fitted dual box
 * (per-axis slope range over the interior evaluation window, padded 5%) and
 * reports the max |f** - f| over the interior two-thirds of the grid against
 * the spacing-scaled duality tolerance; a non-convex input yields a
 * not-applicable verdict carrying the violation location.
 *
 * young_gap(f, g) reports min over finite grid pairs of
 * f(v) + g(xi) - <v,xi>, which is >= 0 up to duality tolerance exactly when
 * g is (an upper bound for) the conjugate of f.
 */

#include <functional>

#include "vds/check.hpp"
#include "vds/sampled_function.hpp"

namespace vds {

struct ConjugateOptions {
  // Caller asserts f is a sum of one-variable functions, enabling the
  // axis-by-axis path (valid in any supported dimension).
  bool separable{false};
};

SampledFunction conjugate(const SampledFunction& f, const GridSpec& dual_grid,
                          const ConjugateOptions& opts = {});

// Exhaustive reference implementation (dimensions 1..3); the fast path must
// agree with this bitwise, which is unit-tested.
SampledFunction conjugate_brute(const SampledFunction& f, const GridSpec& dual_grid);

// Fit a dual grid for biconjugation: per-axis slope range of f over the
// interior evaluation window, padded 5%, same node count as the primal axis.
GridSpec fitted_dual_grid(const SampledFunction& f);

CheckReport biconjugate_check(const SampledFunction& f);

real young_gap(const SampledFunction& f, const SampledFunction& fstar);

// Pointwise conjugation of a callable over a fresh uniform grid on `domain`
// (dimensions 1..3): value, maximizing node, and whether every maximizer sat
// on the domain boundary.
struct ScanResult {
  real value{-kInf};
  Vec argmax;
  bool boundary_only{false};
};
ScanResult conjugate_scan(const std::function<real(const Vec&)>& f, const Box& domain,
                          int nodes_per_axis, const Vec& xi);

}  // namespace vds
