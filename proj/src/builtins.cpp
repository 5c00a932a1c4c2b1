#include "vds/builtins.hpp"

#include <cmath>

#include "vds/structure.hpp"

namespace vds {

namespace {

Functional scalar_functional(std::function<real(const Vec&)> v, std::function<Vec(const Vec&)> g,
                             std::function<Mat(const Vec&)> h = nullptr) {
  Functional f;
  f.value = std::move(v);
  f.grad = std::move(g);
  f.hess = std::move(h);
  return f;
}

}  // namespace

Bundle make_quadratic_1d() {
  Bundle b;
  b.name = "quadratic-1d";
  b.dim = 1;
  b.kind = BundleKind::GradientFlow;
  b.S = scalar_functional([](const Vec& z) { return z[0] * z[0]; },
                          [](const Vec& z) { return Vec::Constant(1, 2.0 * z[0]); },
                          [](const Vec&) { return Mat::Constant(1, 1, 2.0); });
  DissipationPotential d;
  d.psi_star = [](const Vec&, const Vec& xi) { return 0.5 * xi[0] * xi[0]; };
  d.d_xi = [](const Vec&, const Vec& xi) -> Vec { return xi; };
  d.psi = [](const Vec&, const Vec& u) { return 0.5 * u[0] * u[0]; };
  b.dissipation = d;
  Hamiltonian h;
  h.value = [](const Vec& z, const Vec& xi) { return 0.5 * xi[0] * xi[0] - z[0] * xi[0]; };
  h.d_xi = [](const Vec& z, const Vec& xi) -> Vec { return Vec::Constant(1, xi[0] - z[0]); };
  b.hamiltonian = h;
  Lagrangian lag;
  lag.value = [](const Vec& z, const Vec& v) {
    const real s = v[0] + z[0];
    return 0.5 * s * s;
  };
  b.lagrangian = lag;
  b.state_box = Box::cube(1, -2.0, 2.0);
  b.xi_box = Box::cube(1, -4.0, 4.0);
  return b;
}

Bundle make_cosh_1d() {
  Bundle b;
  b.name = "cosh-1d";
  b.dim = 1;
  b.kind = BundleKind::GradientFlow;
  b.S = scalar_functional([](const Vec& z) { return z[0] * z[0]; },
                          [](const Vec& z) { return Vec::Constant(1, 2.0 * z[0]); },
                          [](const Vec&) { return Mat::Constant(1, 1, 2.0); });
  DissipationPotential d;
  d.psi_star = [](const Vec&, const Vec& xi) { return std::cosh(xi[0]) - 1.0; };
  d.d_xi = [](const Vec&, const Vec& xi) -> Vec { return Vec::Constant(1, std::sinh(xi[0])); };
  d.psi = [](const Vec&, const Vec& u) {
    const real v = u[0];
    return v * std::asinh(v) - std::sqrt(1.0 + v * v) + 1.0;
  };
  b.dissipation = d;
  Hamiltonian h;
  h.value = [](const Vec& z, const Vec& xi) {
    return std::cosh(xi[0] - z[0]) - std::cosh(z[0]);
  };
  h.d_xi = [](const Vec& z, const Vec& xi) -> Vec {
    return Vec::Constant(1, std::sinh(xi[0] - z[0]));
  };
  b.hamiltonian = h;
  Lagrangian lag;
  lag.value = [](const Vec& z, const Vec& v) {
    const real u = v[0];
    const real psi = u * std::asinh(u) - std::sqrt(1.0 + u * u) + 1.0;
    return psi + std::cosh(z[0]) - 1.0 + u * z[0];
  };
  b.lagrangian = lag;
  b.state_box = Box::cube(1, -2.0, 2.0);
  b.xi_box = Box::cube(1, -4.0, 4.0);
  return b;
}

Bundle make_rotation() {
  Bundle b;
  b.name = "rotation";
  b.dim = 2;
  b.kind = BundleKind::PreGeneric;
  auto energy_like =
      scalar_functional([](const Vec& z) { return 0.5 * z.squaredNorm(); },
                        [](const Vec& z) -> Vec { return z; },
                        [](const Vec&) { return Mat::Identity(2, 2); });
  b.S = energy_like;
  b.E = energy_like;
  VectorField w;
  w.value = [](const Vec& z) -> Vec {
    Vec out(2);
    out << z[1], -z[0];
    return out;
  };
  w.jacobian = [](const Vec&) -> Mat {
    Mat j(2, 2);
    j << 0, 1, -1, 0;
    return j;
  };
  b.W = w;
  Mat J(2, 2);
  J << 0, 1, -1, 0;
  b.L = PoissonOperator::constant(J);
  DissipationPotential d;
  d.psi_star = [](const Vec&, const Vec& xi) { return 0.5 * xi.squaredNorm(); };
  d.d_xi = [](const Vec&, const Vec& xi) -> Vec { return xi; };
  d.psi = [](const Vec&, const Vec& u) { return 0.5 * u.squaredNorm(); };
  b.dissipation = d;
  Hamiltonian h;
  h.value = [](const Vec& z, const Vec& xi) {
    const real wxi = z[1] * xi[0] - z[0] * xi[1];
    return wxi + 0.5 * xi.squaredNorm() - 0.5 * xi.dot(z);
  };
  h.d_xi = [](const Vec& z, const Vec& xi) -> Vec {
    Vec w(2);
    w << z[1], -z[0];
    return w + xi - 0.5 * z;
  };
  b.hamiltonian = h;
  Lagrangian lag;
  lag.value = [](const Vec& z, const Vec& v) {
    Vec w(2);
    w << z[1], -z[0];
    return 0.5 * (v - w).squaredNorm() + 0.125 * z.squaredNorm() + 0.5 * v.dot(z);
  };
  b.lagrangian = lag;
  b.state_box = Box::cube(2, -2.0, 2.0);
  b.xi_box = Box::cube(2, -3.0, 3.0);
  return b;
}

Bundle make_oscillator_base(real m, real gamma, real k) {
  Bundle b;
  b.name = "damped-oscillator-base";
  b.dim = 2;
  b.kind = BundleKind::PreGeneric;
  auto energy_like = scalar_functional(
      [m, k](const Vec& z) { return 0.5 * z[1] * z[1] / m + 0.5 * k * z[0] * z[0]; },
      [m, k](const Vec& z) -> Vec {
        Vec g(2);
        g << k * z[0], z[1] / m;
        return g;
      },
      [m, k](const Vec&) -> Mat {
        Mat h = Mat::Zero(2, 2);
        h(0, 0) = k;
        h(1, 1) = 1.0 / m;
        return h;
      });
  b.S = energy_like;
  b.E = energy_like;
  VectorField w;
  w.value = [m, k](const Vec& z) -> Vec {
    Vec out(2);
    out << z[1] / m, -k * z[0];
    return out;
  };
  w.jacobian = [m, k](const Vec&) -> Mat {
    Mat j(2, 2);
    j << 0, 1.0 / m, -k, 0;
    return j;
  };
  b.W = w;
  Mat J(2, 2);
  J << 0, 1, -1, 0;
  b.L = PoissonOperator::constant(J);
  DissipationPotential d;
  d.psi_star = [gamma](const Vec&, const Vec& xi) { return gamma * xi[1] * xi[1]; };
  d.d_xi = [gamma](const Vec&, const Vec& xi) -> Vec {
    Vec g(2);
    g << 0.0, 2.0 * gamma * xi[1];
    return g;
  };
  d.psi = [gamma](const Vec&, const Vec& u) {
    // Dual of gamma*xi_p^2: finite only for velocities along the p-axis.
    if (std::fabs(u[0]) > 1e-9 * (1.0 + u.norm())) return kInf;
    return u[1] * u[1] / (4.0 * gamma);
  };
  b.dissipation = d;
  Hamiltonian h;
  h.value = [m, gamma, k](const Vec& z, const Vec& xi) {
    const real wxi = (z[1] / m) * xi[0] - k * z[0] * xi[1];
    const real c = 0.5 * z[1] / m;
    return wxi + gamma * (xi[1] - c) * (xi[1] - c) - gamma * c * c;
  };
  h.d_xi = [m, gamma, k](const Vec& z, const Vec& xi) -> Vec {
    Vec g(2);
    g << z[1] / m, -k * z[0] + 2.0 * gamma * (xi[1] - 0.5 * z[1] / m);
    return g;
  };
  b.hamiltonian = h;
  Lagrangian lag;
  lag.value = [m, gamma, k](const Vec& z, const Vec& v) {
    Vec w(2);
    w << z[1] / m, -k * z[0];
    const Vec u = v - w;
    if (std::fabs(u[0]) > 1e-9 * (1.0 + u.norm())) return kInf;
    Vec ds(2);
    ds << k * z[0], z[1] / m;
    const real c = 0.5 * z[1] / m;
    return u[1] * u[1] / (4.0 * gamma) + gamma * c * c + 0.5 * v.dot(ds);
  };
  b.lagrangian = lag;
  b.velocity_sampler = [](std::uint64_t i, const Vec&) -> Vec {
    // Deviations within the dissipative range (the p-axis).
    Vec v = Vec::Zero(2);
    v[1] = -3.0 + 6.0 * halton(i + 1, 2);
    return v;
  };
  b.state_box = Box::cube(2, -2.0, 2.0);
  b.xi_box = Box::cube(2, -3.0, 3.0);
  return b;
}

Bundle make_damped_oscillator(real m, real gamma, real k) {
  Bundle b;
  b.name = "damped-oscillator";
  b.dim = 3;
  b.kind = BundleKind::Generic;
  b.S = scalar_functional([](const Vec& z) { return -z[2]; },
                          [](const Vec&) -> Vec {
                            Vec g(3);
                            g << 0, 0, -1;
                            return g;
                          },
                          [](const Vec&) { return Mat::Zero(3, 3); });
  b.E = scalar_functional(
      [m, k](const Vec& z) { return 0.5 * z[1] * z[1] / m + 0.5 * k * z[0] * z[0] + z[2]; },
      [m, k](const Vec& z) -> Vec {
        Vec g(3);
        g << k * z[0], z[1] / m, 1.0;
        return g;
      },
      [m, k](const Vec&) -> Mat {
        Mat h = Mat::Zero(3, 3);
        h(0, 0) = k;
        h(1, 1) = 1.0 / m;
        return h;
      });
  VectorField w;
  w.value = [m, k](const Vec& z) -> Vec {
    Vec out(3);
    out << z[1] / m, -k * z[0], 0.0;
    return out;
  };
  w.jacobian = [m, k](const Vec&) -> Mat {
    Mat j = Mat::Zero(3, 3);
    j(0, 1) = 1.0 / m;
    j(1, 0) = -k;
    return j;
  };
  b.W = w;
  Mat L = Mat::Zero(3, 3);
  L(0, 1) = 1;
  L(1, 0) = -1;
  b.L = PoissonOperator::constant(L);
  DissipationPotential d;
  d.psi_star = [m, gamma](const Vec& z, const Vec& xi) {
    const real s = xi[1] - (z[1] / m) * xi[2];
    return gamma * s * s;
  };
  d.d_xi = [m, gamma](const Vec& z, const Vec& xi) -> Vec {
    const real s = xi[1] - (z[1] / m) * xi[2];
    Vec g(3);
    g << 0.0, 2.0 * gamma * s, -2.0 * gamma * s * z[1] / m;
    return g;
  };
  d.psi = [m, gamma](const Vec& z, const Vec& u) {
    // Finite only along the range direction (0, 1, -p/m).
    const real scale = 1e-8 * (1.0 + u.norm()) * (1.0 + std::fabs(z[1]) / m);
    if (std::fabs(u[0]) > scale) return kInf;
    if (std::fabs(u[2] + u[1] * z[1] / m) > scale) return kInf;
    return u[1] * u[1] / (4.0 * gamma);
  };
  b.dissipation = d;
  Hamiltonian h;
  h.value = [m, gamma, k](const Vec& z, const Vec& xi) {
    const real wxi = (z[1] / m) * xi[0] - k * z[0] * xi[1];
    const real s = xi[1] - (z[1] / m) * xi[2];
    // Recentering shift: the linear form s evaluated at dS/2 = (0,0,-1/2).
    const real c = 0.5 * z[1] / m;
    return wxi + gamma * (s - c) * (s - c) - gamma * c * c;
  };
  h.d_xi = [m, gamma, k](const Vec& z, const Vec& xi) -> Vec {
    const real s = xi[1] - (z[1] / m) * xi[2];
    const real c = 0.5 * z[1] / m;
    Vec g(3);
    g << z[1] / m, -k * z[0] + 2.0 * gamma * (s - c), -2.0 * gamma * (s - c) * z[1] / m;
    return g;
  };
  b.hamiltonian = h;
  Lagrangian lag;
  lag.value = [m, gamma, k](const Vec& z, const Vec& v) {
    Vec w(3);
    w << z[1] / m, -k * z[0], 0.0;
    const Vec u = v - w;
    const real scale = 1e-8 * (1.0 + u.norm()) * (1.0 + std::fabs(z[1]) / m);
    if (std::fabs(u[0]) > scale) return kInf;
    if (std::fabs(u[2] + u[1] * z[1] / m) > scale) return kInf;
    const real c = 0.5 * z[1] / m;
    return u[1] * u[1] / (4.0 * gamma) + gamma * c * c - 0.5 * v[2];
  };
  b.lagrangian = lag;
  b.velocity_sampler = [m](std::uint64_t i, const Vec& z) -> Vec {
    const real t = -3.0 + 6.0 * halton(i + 1, 2);
    Vec v(3);
    v << 0.0, t, -t * z[1] / m;
    return v;
  };
  b.state_box = Box::cube(3, -2.0, 2.0);
  b.state_box.lo[2] = -1.0;
  b.state_box.hi[2] = 3.0;
  b.xi_box = Box::cube(3, -3.0, 3.0);
  return b;
}

Bundle make_sign_broken_quadratic() {
  Bundle b = make_quadratic_1d();
  b.name = "sign-broken-quadratic";
  Hamiltonian h;
  h.value = [](const Vec& z, const Vec& xi) { return 0.5 * xi[0] * xi[0] + z[0] * xi[0]; };
  h.d_xi = [](const Vec& z, const Vec& xi) -> Vec { return Vec::Constant(1, xi[0] + z[0]); };
  b.hamiltonian = h;
  // Flow induced by the broken Hamiltonian's zero-cost velocity (+z), with
  // the original dissipation pair retained for residual evaluation.
  b.flow_override = [](const Vec& z) -> Vec { return z; };
  return b;
}

Bundle make_sign_broken_quadratic_derived_psi() {
  Bundle b = make_sign_broken_quadratic();
  b.name = "sign-broken-quadratic-derived-psi";
  b.dissipation = psi_star_from_hamiltonian(*b.hamiltonian, b.S);
  return b;
}

Bundle make_broken_jacobi_bundle() {
  Bundle b;
  b.name = "broken-jacobi";
  b.dim = 3;
  b.kind = BundleKind::Raw;
  b.S = scalar_functional([](const Vec& z) { return 0.5 * z.squaredNorm(); },
                          [](const Vec& z) -> Vec { return z; },
                          [](const Vec&) { return Mat::Identity(3, 3); });
  PoissonOperator op;
  op.apply = [](const Vec& z, const Vec& xi) -> Vec {
    Vec out(3);
    out << z[1] * xi[1], -z[1] * xi[0] + z[0] * xi[2], -z[0] * xi[1];
    return out;
  };
  op.partial = [](const Vec&, int k, const Vec& xi) -> Vec {
    Vec out = Vec::Zero(3);
    if (k == 0) {
      out[1] = xi[2];
      out[2] = -xi[1];
    } else if (k == 1) {
      out[0] = xi[1];
      out[1] = -xi[0];
    }
    return out;
  };
  b.L = op;
  DissipationPotential d;
  d.psi_star = [](const Vec&, const Vec& xi) { return 0.5 * xi.squaredNorm(); };
  d.d_xi = [](const Vec&, const Vec& xi) -> Vec { return xi; };
  d.psi = [](const Vec&, const Vec& u) { return 0.5 * u.squaredNorm(); };
  b.dissipation = d;
  b.state_box = Box::cube(3, -2.0, 2.0);
  b.xi_box = Box::cube(3, -3.0, 3.0);
  return b;
}

}  // namespace vds
