#pragma once

/*
 * Building blocks for variational structures on finite-dimensional state
 * spaces: scalar functionals with analytic or finite-difference gradients,
 * vector fields, antisymmetric (Poisson-type) operators, dissipation
 * potentials, Hamiltonians, and Lagrangians (extended-real valued).
 *
 * Finite-difference fallbacks use central differences with step
 * 1e-5 * (1 + |argument|); gradient_consistency() provides a Richardson-style
 * cross-check between resolutions (or against the analytic gradient).
 */

#include <functional>

#include "vds/numerics.hpp"

namespace vds {

namespace detail {

inline Vec central_fd(const std::function<real(const Vec&)>& f, const Vec& x, real h) {
  Vec g(x.size());
  Vec xp = x, xm = x;
  for (int k = 0; k < x.size(); ++k) {
    const real save = x[k];
    xp[k] = save + h;
    xm[k] = save - h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = save;
    xm[k] = save;
  }
  return g;
}

}  // namespace detail

struct Functional {
  std::function<real(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;  // analytic; empty -> central differences
  std::function<Mat(const Vec&)> hess;  // analytic only; no fallback

  bool has_analytic_grad() const { return static_cast<bool>(grad); }
  bool has_analytic_hess() const { return static_cast<bool>(hess); }

  real fd_step(const Vec& z) const { return 1e-5 * (1.0 + z.norm()); }

  Vec gradient(const Vec& z) const {
    if (grad) return grad(z);
    return detail::central_fd(value, z, fd_step(z));
  }

  // Relative residual between gradient routes: analytic vs FD(h) when an
  // analytic gradient exists, else the Richardson gap (4/3)|FD(h)-FD(h/2)|.
  real gradient_consistency(const Vec& z) const {
    const real h = fd_step(z);
    const Vec a = grad ? grad(z) : detail::central_fd(value, z, h);
    const Vec b = grad ? detail::central_fd(value, z, h) : detail::central_fd(value, z, 0.5 * h);
    const real scale = 1.0 + std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>());
    real gap = (a - b).lpNorm<Eigen::Infinity>();
    if (!grad) gap *= 4.0 / 3.0;
    return gap / scale;
  }
};

struct VectorField {
  std::function<Vec(const Vec&)> value;
  // jacobian(z)(i,k) = d value_i / d z_k; optional, enables Jacobi testing of
  // operators assembled from this field.
  std::function<Mat(const Vec&)> jacobian;
};

struct PoissonOperator {
  std::function<Vec(const Vec&, const Vec&)> apply;          // L(z) xi
  std::function<Vec(const Vec&, int, const Vec&)> partial;   // (dL/dz_k)(z) xi; optional

  static PoissonOperator constant(const Mat& L) {
    PoissonOperator op;
    op.apply = [L](const Vec&, const Vec& xi) -> Vec { return L * xi; };
    op.partial = [n = L.rows()](const Vec&, int, const Vec&) -> Vec { return Vec::Zero(n); };
    return op;
  }
};

struct DissipationPotential {
  std::function<real(const Vec&, const Vec&)> psi_star;  // dual potential, in the covector slot
  std::function<Vec(const Vec&, const Vec&)> d_xi;       // analytic covector gradient; optional
  std::function<real(const Vec&, const Vec&)> psi;       // primal potential (+inf allowed); optional

  bool has_analytic_d_xi() const { return static_cast<bool>(d_xi); }

  Vec xi_gradient(const Vec& z, const Vec& xi) const {
    if (d_xi) return d_xi(z, xi);
    return detail::central_fd([&](const Vec& x) { return psi_star(z, x); }, xi,
                              1e-5 * (1.0 + xi.norm()));
  }
};

struct Hamiltonian {
  std::function<real(const Vec&, const Vec&)> value;
  std::function<Vec(const Vec&, const Vec&)> d_xi;  // optional analytic

  bool has_analytic_d_xi() const { return static_cast<bool>(d_xi); }

  Vec xi_gradient(const Vec& z, const Vec& xi) const {
    if (d_xi) return d_xi(z, xi);
    return detail::central_fd([&](const Vec& x) { return value(z, x); }, xi,
                              1e-5 * (1.0 + xi.norm()));
  }
};

struct Lagrangian {
  std::function<real(const Vec&, const Vec&)> value;  // may return +inf
};

}  // namespace vds
