/*
 * State-space extensions: hat (auxiliary frozen scalar), bar (energy
 * reservoir), and the alpha-interpolating family.
 *
 * Verified here, with closed-form oracles computed first and frozen into the
 * assertions:
 *   - hat of the rotation: operator values match (r W, -<W,xi>) bitwise,
 *     antisymmetry residual <= 1e-12, Jacobi residual <= 1e-10 (cubic test
 *     functionals over 256 states), L dS == 0 bitwise, dE-shift invariance of
 *     the dual potential == 0 bitwise, the auxiliary slot of the pinned flow
 *     == 0 bitwise, and the full audit (9 checks) passes.
 *   - bar of the oscillator base reproduces the three-dimensional damped
 *     oscillator bundle pointwise at 64 sampled states/covectors: entropy
 *     gradients, energy values/gradients, drift, operator action, and dual
 *     potential agree bitwise; potentials, covector gradients, flows, and the
 *     reassembled Hamiltonian agree within 1e-12; its audit (9 checks)
 *     passes with L dS == 0 bitwise.
 *   - interpolation: alpha=1 matches the bar bundle bitwise on entropy,
 *     operator, dual potential, and flow; alpha=0 matches the drift-block
 *     operator (r W, -<W,xi>) and the base entropy; alpha=1/2 on the rotation
 *     passes the full audit with operator degeneracy == 0 exactly; the flow
 *     is the same map for every alpha.
 *   - refusals: a non-orthogonal drift refuses hat with the orthogonality
 *     diagnostic; a Jacobi-breaking operator refuses bar with the Jacobi
 *     diagnostic; entropy/energy mismatch (L(dS-dE) != 0) refuses bar with
 *     the degeneracy diagnostic; a drift inconsistent with L dE refuses bar;
 *     alpha outside [0,1] and missing ingredients throw invalid-input.
 *   - plumbing: custom base samplers compose (head = base sample, tail in the
 *     adjoined interval); finite-difference bases widen the extended
 *     structural tolerance.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>

#include "doctest.h"
#include "vds/builtins.hpp"
#include "vds/extension.hpp"
#include "vds/structure.hpp"

using namespace vds;

namespace {

const CheckReport& find_report(const std::vector<CheckReport>& reps, const std::string& name) {
  for (const auto& r : reps)
    if (r.check_name == name) return r;
  throw std::runtime_error("missing check report: " + name);
}

Functional scalar_functional(std::function<real(const Vec&)> v, std::function<Vec(const Vec&)> g) {
  Functional f;
  f.value = std::move(v);
  f.grad = std::move(g);
  return f;
}

// 1-D bundle whose drift z is NOT entropy-orthogonal (<W,dS> = 2 z^2).
Bundle non_orthogonal_bundle() {
  Bundle b;
  b.name = "non-orthogonal";
  b.dim = 1;
  b.kind = BundleKind::Raw;
  b.S = scalar_functional([](const Vec& z) { return z[0] * z[0]; },
                          [](const Vec& z) { return Vec::Constant(1, 2.0 * z[0]); });
  VectorField w;
  w.value = [](const Vec& z) -> Vec { return z; };
  w.jacobian = [](const Vec&) { return Mat::Identity(1, 1); };
  b.W = w;
  DissipationPotential d;
  d.psi_star = [](const Vec&, const Vec& xi) { return 0.5 * xi[0] * xi[0]; };
  d.d_xi = [](const Vec&, const Vec& xi) -> Vec { return xi; };
  b.dissipation = d;
  b.state_box = Box::cube(1, -2.0, 2.0);
  b.xi_box = Box::cube(1, -2.0, 2.0);
  return b;
}

}  // namespace

TEST_CASE("hat extension carries the closed-form operator and frozen scalar") {
  const Bundle base = make_rotation();
  const Bundle hat = hat_extend(base);
  CHECK(hat.dim == 3);
  CHECK(hat.kind == BundleKind::Generic);
  CHECK(hat.name == "hat-rotation");

  for (int i = 0; i < 32; ++i) {
    const Vec z = sample_state(hat, i);
    const Vec xi = sample_xi(hat, i);
    const Vec zb = z.head(2);
    const Vec xib = xi.head(2);
    const Vec wz = base.W->value(zb);

    // Entropy and energy of the extended state.
    CHECK(hat.S.value(z) == base.S.value(zb));
    CHECK((hat.S.gradient(z).head(2) - base.S.gradient(zb)).norm() == 0.0);
    CHECK(hat.S.gradient(z)[2] == 0.0);
    CHECK(hat.E->value(z) == z[2]);
    CHECK(hat.E->gradient(z)[2] == 1.0);

    // Operator action and its state derivatives.
    const Vec lv = hat.L->apply(z, xi);
    CHECK((lv.head(2) - xi[2] * wz).norm() == 0.0);
    CHECK(lv[2] == -wz.dot(xib));
    for (int k = 0; k < 2; ++k) {
      const Vec wk = base.W->jacobian(zb).col(k);
      const Vec pv = hat.L->partial(z, k, xi);
      CHECK((pv.head(2) - xi[2] * wk).norm() == 0.0);
      CHECK(pv[2] == -wk.dot(xib));
    }
    CHECK(hat.L->partial(z, 2, xi).norm() == 0.0);

    // Dual potential ignores the auxiliary covector slot bitwise.
    CHECK(hat.dissipation->psi_star(z, xi) == base.dissipation->psi_star(zb, xib));
    Vec shifted = xi;
    shifted[2] += 0.7;
    CHECK(hat.dissipation->psi_star(z, shifted) == hat.dissipation->psi_star(z, xi));

    // Primal potential: finite only on the s = 0 plane.
    Vec u(3);
    u << 0.3, -0.4, 0.0;
    CHECK(hat.dissipation->psi(z, u) == base.dissipation->psi(zb, u.head(2)));
    u[2] = 0.5;
    CHECK(hat.dissipation->psi(z, u) == kInf);

    // The pinned flow freezes the auxiliary coordinate exactly.
    const Vec f = hat.flow_velocity(z);
    CHECK(f[2] == 0.0);
    CHECK((f.head(2) - base.flow_velocity(zb)).norm() == 0.0);
  }
}

TEST_CASE("hat extension of the rotation passes the full audit") {
  const Bundle hat = hat_extend(make_rotation());
  const auto reports = structure_audit(hat);
  CHECK(reports.size() == 9);
  for (const auto& r : reports) {
    INFO(r.one_line());
    CHECK(!r.failed());
  }
  CHECK(find_report(reports, "operator-antisymmetry").residual <= 1e-12);
  const auto& jac = find_report(reports, "jacobi-identity");
  CHECK(jac.verdict == Verdict::Pass);
  CHECK(jac.residual <= 1e-10);
  CHECK(find_report(reports, "operator-degeneracy").residual == 0.0);
  CHECK(find_report(reports, "psi-star-degeneracy").residual == 0.0);
  CHECK(find_report(reports, "drift-orthogonality").residual == 0.0);
}

TEST_CASE("bar of the oscillator base reproduces the damped oscillator pointwise") {
  const Bundle base = make_oscillator_base();
  const Bundle bar = bar_extend(base);
  const Bundle direct = make_damped_oscillator();
  CHECK(bar.dim == 3);
  CHECK(bar.kind == BundleKind::Generic);

  // Equal sampling boxes => identical deterministic sample streams.
  CHECK((bar.state_box.lo - direct.state_box.lo).norm() == 0.0);
  CHECK((bar.state_box.hi - direct.state_box.hi).norm() == 0.0);
  CHECK((bar.xi_box.lo - direct.xi_box.lo).norm() == 0.0);

  const Hamiltonian rebuilt = hamiltonian_from_psi_star(*bar.dissipation, bar.S);
  for (int i = 0; i < 64; ++i) {
    const Vec z = sample_state(direct, i);
    const Vec xi = sample_xi(direct, i);

    // Entropy: value within rounding of -e, gradient (0,0,-1) bitwise.
    CHECK(std::fabs(bar.S.value(z) - direct.S.value(z)) <= 1e-12);
    CHECK((bar.S.gradient(z) - direct.S.gradient(z)).norm() == 0.0);

    // Energy, drift, operator action, dual potential: bitwise.
    CHECK(bar.E->value(z) == direct.E->value(z));
    CHECK((bar.E->gradient(z) - direct.E->gradient(z)).norm() == 0.0);
    CHECK((bar.W->value(z) - direct.W->value(z)).norm() == 0.0);
    CHECK((bar.L->apply(z, xi) - direct.L->apply(z, xi)).norm() == 0.0);
    CHECK(bar.dissipation->psi_star(z, xi) == direct.dissipation->psi_star(z, xi));

    // Covector gradient and flow: same values, different association order.
    CHECK((bar.dissipation->xi_gradient(z, xi) - direct.dissipation->xi_gradient(z, xi))
              .lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((bar.flow_velocity(z) - direct.flow_velocity(z)).lpNorm<Eigen::Infinity>() <= 1e-12);

    // Primal potential along the dissipative deviations.
    const Vec v = sample_velocity(direct, i, z);
    const real pb = bar.dissipation->psi(z, v);
    const real pd = direct.dissipation->psi(z, v);
    CHECK(is_finite(pb));
    CHECK(pb == pd);

    // Drift-free generator rebuilt from the tilted potential matches the
    // declared Hamiltonian of the direct bundle minus its transport part.
    const real h_direct = direct.hamiltonian->value(z, xi) - direct.drift(z).dot(xi);
    CHECK(std::fabs(rebuilt.value(z, xi) - h_direct) <= 1e-12);
  }
}

TEST_CASE("bar of the oscillator base passes the full audit") {
  const Bundle bar = bar_extend(make_oscillator_base());
  const auto reports = structure_audit(bar);
  CHECK(reports.size() == 9);
  for (const auto& r : reports) {
    INFO(r.one_line());
    CHECK(!r.failed());
  }
  // dS - dE of the base vanishes bitwise, so the block operator annihilates
  // the bar entropy gradient exactly; the dE-shift of the tilted potential
  // cancels to rounding.
  CHECK(find_report(reports, "operator-degeneracy").residual == 0.0);
  CHECK(find_report(reports, "psi-star-degeneracy").residual <= 1e-12);
  CHECK(find_report(reports, "hamiltonian-reversibility").residual <= 1e-12);
  CHECK(find_report(reports, "operator-antisymmetry").residual == 0.0);
  CHECK(find_report(reports, "jacobi-identity").verdict == Verdict::Pass);
}

TEST_CASE("bar energy balance feeds dissipated energy into the reservoir") {
  const Bundle base = make_oscillator_base();  // m = gamma = k = 1
  const Bundle bar = bar_extend(base);
  for (int i = 0; i < 16; ++i) {
    const Vec z = sample_state(bar, i);
    const Vec f = bar.flow_velocity(z);
    // de/dt = gamma p^2 / m^2 >= 0, and d(E+e)/dt = 0 along the flow.
    const real p = z[1];
    CHECK(std::fabs(f[2] - p * p) <= 1e-12);
    const real energy_rate = bar.E->gradient(z).dot(f);
    CHECK(std::fabs(energy_rate) <= 1e-12);
    // dS/dt = -de/dt <= 0: the bar entropy is a Lyapunov function.
    const real entropy_rate = bar.S.gradient(z).dot(f);
    CHECK(entropy_rate <= 1e-15);
  }
}

TEST_CASE("interpolation endpoints reproduce the drift-block and bar forms") {
  const Bundle base = make_rotation();
  const Bundle bar = bar_extend(base);
  const Bundle a0 = interpolate_extend(base, 0.0);
  const Bundle a1 = interpolate_extend(base, 1.0);

  for (int i = 0; i < 48; ++i) {
    const Vec z = sample_state(bar, i);
    const Vec xi = sample_xi(bar, i);
    const Vec zb = z.head(2);
    const Vec xib = xi.head(2);
    const Vec wz = base.W->value(zb);

    // alpha = 1: the bar bundle, bitwise.
    CHECK(a1.S.value(z) == bar.S.value(z));
    CHECK((a1.S.gradient(z) - bar.S.gradient(z)).norm() == 0.0);
    CHECK(a1.E->value(z) == bar.E->value(z));
    CHECK((a1.L->apply(z, xi) - bar.L->apply(z, xi)).norm() == 0.0);
    CHECK(a1.dissipation->psi_star(z, xi) == bar.dissipation->psi_star(z, xi));
    CHECK((a1.flow_velocity(z) - bar.flow_velocity(z)).norm() == 0.0);

    // alpha = 0: base entropy and the drift-block operator (r W, -<W,xi>).
    CHECK(a0.S.value(z) == base.S.value(zb));
    CHECK((a0.S.gradient(z).head(2) - base.S.gradient(zb)).norm() == 0.0);
    CHECK(a0.S.gradient(z)[2] == 0.0);
    const Vec lv = a0.L->apply(z, xi);
    CHECK((lv.head(2) - xi[2] * wz).norm() == 0.0);
    CHECK(lv[2] == -wz.dot(xib));

    // The pinned flow is the same map for every alpha.
    CHECK((a0.flow_velocity(z) - a1.flow_velocity(z)).norm() == 0.0);
  }
}

TEST_CASE("interpolation at alpha one half passes the full audit") {
  const Bundle half = interpolate_extend(make_rotation(), 0.5);
  CHECK(half.name == "interp-rotation");
  const auto reports = structure_audit(half);
  CHECK(reports.size() == 9);
  for (const auto& r : reports) {
    INFO(r.one_line());
    CHECK(!r.failed());
  }
  // With S = E = |z|^2/2 both operator summands annihilate dS_alpha through
  // exactly representable halvings, so the degeneracy is bitwise even at the
  // midpoint.
  CHECK(find_report(reports, "operator-degeneracy").residual == 0.0);
  CHECK(find_report(reports, "operator-antisymmetry").residual <= 1e-12);
  CHECK(find_report(reports, "jacobi-identity").verdict == Verdict::Pass);
}

TEST_CASE("interpolation of the oscillator base matches its bar bundle at alpha one") {
  const Bundle base = make_oscillator_base();
  const Bundle bar = bar_extend(base);
  const Bundle a1 = interpolate_extend(base, 1.0);
  for (int i = 0; i < 32; ++i) {
    const Vec z = sample_state(bar, i);
    const Vec xi = sample_xi(bar, i);
    CHECK(a1.S.value(z) == bar.S.value(z));
    CHECK((a1.S.gradient(z) - bar.S.gradient(z)).norm() == 0.0);
    CHECK((a1.L->apply(z, xi) - bar.L->apply(z, xi)).norm() == 0.0);
    CHECK(a1.dissipation->psi_star(z, xi) == bar.dissipation->psi_star(z, xi));
    CHECK((a1.flow_velocity(z) - bar.flow_velocity(z)).norm() == 0.0);
  }
}

TEST_CASE("extensions refuse structurally incompatible bases") {
  SUBCASE("non-orthogonal drift refuses hat with a diagnostic") {
    bool thrown = false;
    try {
      hat_extend(non_orthogonal_bundle());
    } catch (const NumericalRefusal& e) {
      thrown = true;
      CHECK(std::string(e.what()).find("orthogonality") != std::string::npos);
      CHECK(std::string(e.what()).find("non-orthogonal") != std::string::npos);
    }
    CHECK(thrown);
  }

  SUBCASE("jacobi-breaking operator refuses bar with a diagnostic") {
    Bundle b = make_broken_jacobi_bundle();
    b.E = b.S;  // L dS = L dE, so only the Jacobi precondition can fail
    bool thrown = false;
    try {
      bar_extend(b);
    } catch (const NumericalRefusal& e) {
      thrown = true;
      CHECK(std::string(e.what()).find("jacobi-identity") != std::string::npos);
    }
    CHECK(thrown);
  }

  SUBCASE("operator that fails to annihilate dS - dE refuses bar") {
    Bundle b = make_oscillator_base();
    const Functional e = *b.E;
    Functional doubled;
    doubled.value = [e](const Vec& z) { return 2.0 * e.value(z); };
    doubled.grad = [e](const Vec& z) -> Vec { return 2.0 * e.gradient(z); };
    b.E = doubled;
    bool thrown = false;
    try {
      bar_extend(b);
    } catch (const NumericalRefusal& ex) {
      thrown = true;
      CHECK(std::string(ex.what()).find("dS - dE") != std::string::npos);
    }
    CHECK(thrown);
  }

  SUBCASE("drift inconsistent with L dE refuses bar") {
    Bundle b = make_oscillator_base();
    b.S = *b.E;  // keep L(dS-dE)=0 while breaking W = L dE
    VectorField w;
    w.value = [](const Vec& z) -> Vec {
      Vec out(2);
      out << 2.0 * z[1], -2.0 * z[0];
      return out;
    };
    b.W = w;
    bool thrown = false;
    try {
      bar_extend(b);
    } catch (const NumericalRefusal& ex) {
      thrown = true;
      CHECK(std::string(ex.what()).find("L dE") != std::string::npos);
    }
    CHECK(thrown);
  }

  SUBCASE("missing ingredients and out-of-range alpha throw invalid-input") {
    CHECK_THROWS_AS((void)hat_extend(make_quadratic_1d()), InvalidInput);  // no drift W
    CHECK_THROWS_AS((void)bar_extend(make_broken_jacobi_bundle()), InvalidInput);  // no E
    CHECK_THROWS_AS((void)interpolate_extend(make_rotation(), 1.5), InvalidInput);
    CHECK_THROWS_AS((void)interpolate_extend(make_rotation(), -0.1), InvalidInput);
    const real nan = kNaN;
    CHECK_THROWS_AS((void)interpolate_extend(make_rotation(), nan), InvalidInput);
  }
}

TEST_CASE("extensions compose custom samplers and propagate gradient accuracy") {
  SUBCASE("custom base samplers feed the extended streams") {
    Bundle base = make_rotation();
    base.state_sampler = [](std::uint64_t i) -> Vec {
      Vec z(2);
      z << std::cos(0.1 * static_cast<real>(i)), std::sin(0.1 * static_cast<real>(i));
      return z;
    };
    base.xi_sampler = [](std::uint64_t i) -> Vec {
      return Vec::Constant(2, 0.01 * static_cast<real>(i) - 0.5);
    };
    const Bundle hat = hat_extend(base);
    REQUIRE(static_cast<bool>(hat.state_sampler));
    REQUIRE(static_cast<bool>(hat.xi_sampler));
    for (std::uint64_t i = 0; i < 8; ++i) {
      const Vec z = sample_state(hat, i);
      CHECK((z.head(2) - base.state_sampler(i)).norm() == 0.0);
      CHECK(z[2] >= -1.0);
      CHECK(z[2] <= 1.0);
      const Vec xi = sample_xi(hat, i);
      CHECK((xi.head(2) - base.xi_sampler(i)).norm() == 0.0);
    }
  }

  SUBCASE("finite-difference bases widen the extended tolerance") {
    Bundle base = make_rotation();
    base.S.grad = nullptr;
    base.S.hess = nullptr;
    CHECK(base.tol_struct() == kTolStructFd);
    const Bundle hat = hat_extend(base);
    CHECK(hat.fd_gradients);
    CHECK(hat.tol_struct() == kTolStructFd);
    const Bundle exact = hat_extend(make_rotation());
    CHECK(!exact.fd_gradients);
    CHECK(exact.tol_struct() == kTolStructAnalytic);
  }
}
