#pragma once

/*
 * Shared numerical primitives: extended-real conventions, deterministic
 * low-discrepancy sampling (Halton), the logarithmic mean, hashing for
 * reproducible report fingerprints, and the globally pinned tolerances.
 *
 * Everything here is deterministic and single-threaded; there is no hidden
 * global state.
 */

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vds/errors.hpp"

namespace vds {

using real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr real kInf = std::numeric_limits<real>::infinity();
inline constexpr real kNaN = std::numeric_limits<real>::quiet_NaN();
inline constexpr real kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Pinned tolerances.  These are the single source of truth; tests and the
// acceptance gate reference these constants rather than re-deriving numbers.
// ---------------------------------------------------------------------------

// Relative slack allowed by the midpoint convexity screen on sampled functions.
inline constexpr real kTolConvexRel = 1e-8;

// Structural identity tolerance when all derivatives are analytic.
inline constexpr real kTolStructAnalytic = 1e-8;
// Structural identity tolerance when finite-difference gradients are in play.
inline constexpr real kTolStructFd = 1e-4;

// Relative tolerance for analytic-vs-finite-difference gradient consistency.
inline constexpr real kTolGradRel = 1e-6;

// Conjugation / duality tolerance scales with the square of the grid spacing:
// 1e-2 at spacing 0.01.  Grid conjugation of a smooth convex function carries
// an O(h^2) envelope error, so the tolerance must follow the same law.
inline real tol_legendre(real h) { return 100.0 * h * h; }

// Per-unit-time slack granted to a Lyapunov monotonicity monitor under a
// fourth-order integrator with step dt.
inline real tol_lyapunov(real dt) { return 10.0 * dt * dt; }

// ---------------------------------------------------------------------------
// Extended-real helpers.
// ---------------------------------------------------------------------------

inline bool is_finite(real x) { return std::isfinite(x); }

// ---------------------------------------------------------------------------
// Logarithmic mean:  lmean(a,b) = (a-b)/(log a - log b), continuously extended
// by the symmetric series for nearly equal arguments, and defined as 0 when
// either argument is nonpositive.  Key properties (unit-tested): symmetric,
// lmean(a,a)=a, min(a,b) <= lmean <= max(a,b) for positive arguments.
// ---------------------------------------------------------------------------
inline real log_mean(real a, real b) {
  if (!(a > 0.0) || !(b > 0.0)) return 0.0;
  const real s = a + b;
  const real r = (a - b) / s;
  const real r2 = r * r;
  if (r2 < 1e-8) {
    // (a-b)/log(a/b) = (s/2) / (1 + r^2/3 + r^4/5 + ...)
    return 0.5 * s / (1.0 + r2 * (1.0 / 3.0 + r2 * 0.2));
  }
  return (a - b) / (std::log(a) - std::log(b));
}

// ---------------------------------------------------------------------------
// Deterministic Halton sampling.  halton(i, base) is the radical-inverse of i
// in the given prime base; HaltonSampler yields points in [0,1)^dim using the
// first `dim` primes, skipping index 0 to avoid the origin.
// ---------------------------------------------------------------------------
inline real halton(std::uint64_t index, unsigned base) {
  real f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<real>(base);
    r += f * static_cast<real>(index % base);
    index /= base;
  }
  return r;
}

inline const std::vector<unsigned>& halton_primes() {
  static const std::vector<unsigned> p = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                          31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  return p;
}

class HaltonSampler {
 public:
  explicit HaltonSampler(int dim, std::uint64_t offset = 0) : dim_(dim), offset_(offset) {
    if (dim < 1 || dim > static_cast<int>(halton_primes().size()))
      throw InvalidInput("HaltonSampler: dimension out of supported range");
  }
  // i-th point of the sequence, in [0,1)^dim.
  Vec point(std::uint64_t i) const {
    Vec u(dim_);
    for (int d = 0; d < dim_; ++d) u[d] = halton(i + 1 + offset_, halton_primes()[d]);
    return u;
  }
  int dim() const { return dim_; }

 private:
  int dim_;
  std::uint64_t offset_;
};

// ---------------------------------------------------------------------------
// Axis-aligned box, used for sampling states and covectors.
// ---------------------------------------------------------------------------
struct Box {
  Vec lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  // Map a unit-cube point into the box.
  Vec map(const Vec& u) const {
    return lo.array() + u.array() * (hi.array() - lo.array());
  }
  static Box cube(int dim, real a, real b) {
    Box box;
    box.lo = Vec::Constant(dim, a);
    box.hi = Vec::Constant(dim, b);
    return box;
  }
  void validate() const {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw InvalidInput("Box: lo/hi dimension mismatch");
    for (int d = 0; d < dim(); ++d)
      if (!(lo[d] < hi[d])) throw InvalidInput("Box: requires lo < hi in every axis");
  }
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash, used to fingerprint canonicalized configurations.
// ---------------------------------------------------------------------------
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vds
