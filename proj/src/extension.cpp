#include "vds/extension.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <utility>

#include "vds/structure.hpp"

namespace vds {

namespace {

using BasePtr = std::shared_ptr<const Bundle>;

// Halton offsets for the adjoined coordinate of composed samplers; distinct
// from every offset used by the identity checks.
constexpr std::uint64_t kOffsetExtraState = 7000003;
constexpr std::uint64_t kOffsetExtraXi = 7000019;

// Sample count for the numeric preconditions of the extensions.
constexpr int kPrecheckSamples = 64;

Vec append(const Vec& v, real s) {
  Vec out(v.size() + 1);
  out.head(v.size()) = v;
  out[v.size()] = s;
  return out;
}

Box extend_box(const Box& b, real lo, real hi) {
  const int n = b.dim();
  Box out;
  out.lo = Vec(n + 1);
  out.hi = Vec(n + 1);
  out.lo.head(n) = b.lo;
  out.hi.head(n) = b.hi;
  out.lo[n] = lo;
  out.hi[n] = hi;
  return out;
}

// Embed an n x n block into the top-left corner of an (n+1) x (n+1) zero matrix.
Mat embed_block(const Mat& m, int n) {
  Mat out = Mat::Zero(n + 1, n + 1);
  out.topLeftCorner(n, n) = m;
  return out;
}

void extend_samplers(const BasePtr& bp, Bundle& ext, const Box& state_ext, const Box& xi_ext) {
  const int n = bp->dim;
  if (bp->state_sampler) {
    auto s = bp->state_sampler;
    const real lo = state_ext.lo[n], hi = state_ext.hi[n];
    ext.state_sampler = [s, lo, hi](std::uint64_t i) -> Vec {
      return append(s(i), lo + (hi - lo) * halton(i + 1 + kOffsetExtraState, 2));
    };
  }
  if (bp->xi_sampler) {
    auto s = bp->xi_sampler;
    const real lo = xi_ext.lo[n], hi = xi_ext.hi[n];
    ext.xi_sampler = [s, lo, hi](std::uint64_t i) -> Vec {
      return append(s(i), lo + (hi - lo) * halton(i + 1 + kOffsetExtraXi, 2));
    };
  }
}

void propagate_fd_flag(const Bundle& base, Bundle& ext) {
  // The extended closures call the base gradients internally, so the extended
  // bundle is only as accurate as the base one.
  ext.fd_gradients = base.tol_struct() > kTolStructAnalytic;
  ext.tol_override = base.tol_override;
}

void refuse_if_failed(const char* what, const Bundle& base, const CheckReport& rep) {
  if (rep.failed())
    throw NumericalRefusal(std::string(what) + " refused on bundle '" + base.name +
                           "': " + rep.one_line());
}

// Preconditions shared by the bar extension and the interpolating family:
// the base operator must be antisymmetric, satisfy the Jacobi identity (when
// testable), annihilate dS - dE, and agree with any declared drift W = L dE.
void require_bar_compatible(const char* what, const Bundle& base) {
  if (!base.E) throw InvalidInput(std::string(what) + ": base bundle must declare E");
  if (!base.L) throw InvalidInput(std::string(what) + ": base bundle must declare an operator L");
  if (!base.dissipation)
    throw InvalidInput(std::string(what) + ": base bundle must declare a dissipation potential");

  refuse_if_failed(what, base, check_antisymmetry(base, kPrecheckSamples));
  refuse_if_failed(what, base, check_jacobi(base, kPrecheckSamples, 2));

  const real tol = base.tol_struct();
  real worst_deg = 0.0, worst_w = 0.0;
  Vec at_deg, at_w;
  for (int i = 0; i < kPrecheckSamples; ++i) {
    const Vec z = sample_state(base, i);
    const Vec de = base.E->gradient(z);
    const real deg = base.L->apply(z, base.S.gradient(z) - de).lpNorm<Eigen::Infinity>();
    if (deg > worst_deg) {
      worst_deg = deg;
      at_deg = z;
    }
    if (base.W) {
      const real dw = (base.W->value(z) - base.L->apply(z, de)).lpNorm<Eigen::Infinity>();
      if (dw > worst_w) {
        worst_w = dw;
        at_w = z;
      }
    }
  }
  if (worst_deg > tol) {
    std::ostringstream os;
    os << what << " refused on bundle '" << base.name
       << "': operator does not annihilate dS - dE (residual=" << worst_deg << ", tol=" << tol
       << ", worst at " << format_point(at_deg) << ")";
    throw NumericalRefusal(os.str());
  }
  if (worst_w > tol) {
    std::ostringstream os;
    os << what << " refused on bundle '" << base.name
       << "': declared drift differs from L dE (residual=" << worst_w << ", tol=" << tol
       << ", worst at " << format_point(at_w) << ")";
    throw NumericalRefusal(os.str());
  }
}

// Energy functional E(z,e) = E_base(z) + e used by bar/interpolation.
Functional total_energy(const BasePtr& bp, int n) {
  Functional e;
  e.value = [bp, n](const Vec& z) { return bp->E->value(z.head(n)) + z[n]; };
  e.grad = [bp, n](const Vec& z) -> Vec { return append(bp->E->gradient(z.head(n)), 1.0); };
  if (bp->E->hess)
    e.hess = [bp, n](const Vec& z) -> Mat { return embed_block(bp->E->hess(z.head(n)), n); };
  return e;
}

// Tilted dissipation pair Psi*((z,e),(xi,r)) = Psi*(z, xi - r dE(z)) shared by
// bar/interpolation; its primal is finite on the plane s + <dE,u> = 0.
DissipationPotential tilted_dissipation(const BasePtr& bp, int n) {
  DissipationPotential d;
  d.psi_star = [bp, n](const Vec& z, const Vec& xi) {
    const Vec zb = z.head(n);
    return bp->dissipation->psi_star(zb, xi.head(n) - xi[n] * bp->E->gradient(zb));
  };
  if (bp->dissipation->d_xi) {
    d.d_xi = [bp, n](const Vec& z, const Vec& xi) -> Vec {
      const Vec zb = z.head(n);
      const Vec de = bp->E->gradient(zb);
      const Vec g = bp->dissipation->d_xi(zb, xi.head(n) - xi[n] * de);
      return append(g, -de.dot(g));
    };
  }
  if (bp->dissipation->psi) {
    // The constraint gate inherits the base's structural tolerance: grid
    // bundles balance energy only to their O(h^2) consistency error.
    const real gate = std::max(kTolStructAnalytic, bp->tol_struct());
    d.psi = [bp, n, gate](const Vec& z, const Vec& u) -> real {
      const Vec zb = z.head(n);
      const Vec de = bp->E->gradient(zb);
      const Vec ub = u.head(n);
      if (std::fabs(u[n] + de.dot(ub)) > gate * (1.0 + u.norm()) * (1.0 + de.norm())) return kInf;
      return bp->dissipation->psi(zb, ub);
    };
  }
  return d;
}

// Flow (dz/dt, de/dt) = (F(z), -<dE(z), F(z)>): the base flow, with the scalar
// slot absorbing exactly the energy the z-motion releases.
std::function<Vec(const Vec&)> energy_balanced_flow(const BasePtr& bp, int n) {
  return [bp, n](const Vec& z) -> Vec {
    const Vec f = bp->flow_velocity(z.head(n));
    return append(f, -bp->E->gradient(z.head(n)).dot(f));
  };
}

VectorField embedded_drift(const BasePtr& bp, int n) {
  VectorField w;
  w.value = [bp, n](const Vec& z) -> Vec { return append(bp->W->value(z.head(n)), 0.0); };
  if (bp->W->jacobian)
    w.jacobian = [bp, n](const Vec& z) -> Mat { return embed_block(bp->W->jacobian(z.head(n)), n); };
  return w;
}

}  // namespace

Bundle hat_extend(const Bundle& base) {
  base.validate();
  if (!base.W) throw InvalidInput("hat-extend: base bundle must declare an antisymmetric drift W");
  if (!base.dissipation)
    throw InvalidInput("hat-extend: base bundle must declare a dissipation potential");
  refuse_if_failed("hat-extend", base, check_orthogonality(base, kPrecheckSamples));

  const BasePtr bp = std::make_shared<const Bundle>(base);
  const int n = base.dim;

  Bundle ext;
  ext.name = "hat-" + base.name;
  ext.dim = n + 1;
  ext.kind = BundleKind::Generic;

  // Entropy: unchanged, flat in the auxiliary slot.
  ext.S.value = [bp, n](const Vec& z) { return bp->S.value(z.head(n)); };
  ext.S.grad = [bp, n](const Vec& z) -> Vec { return append(bp->S.gradient(z.head(n)), 0.0); };
  if (base.S.hess)
    ext.S.hess = [bp, n](const Vec& z) -> Mat { return embed_block(bp->S.hess(z.head(n)), n); };

  // Energy: the auxiliary coordinate itself.
  Functional e;
  e.value = [n](const Vec& z) { return z[n]; };
  e.grad = [n](const Vec&) -> Vec {
    Vec g = Vec::Zero(n + 1);
    g[n] = 1.0;
    return g;
  };
  e.hess = [n](const Vec&) -> Mat { return Mat::Zero(n + 1, n + 1); };
  ext.E = e;

  ext.W = embedded_drift(bp, n);

  // L(z)(xi,r) = (r W(z), -<W(z),xi>): antisymmetric, annihilates dS when
  // <W,dS> = 0, and satisfies the Jacobi identity for every field W(z).
  PoissonOperator op;
  op.apply = [bp, n](const Vec& z, const Vec& xi) -> Vec {
    const Vec wz = bp->W->value(z.head(n));
    Vec out(n + 1);
    out.head(n) = xi[n] * wz;
    out[n] = -wz.dot(xi.head(n));
    return out;
  };
  if (base.W->jacobian) {
    op.partial = [bp, n](const Vec& z, int k, const Vec& xi) -> Vec {
      if (k == n) return Vec::Zero(n + 1);
      const Vec wk = bp->W->jacobian(z.head(n)).col(k);
      Vec out(n + 1);
      out.head(n) = xi[n] * wk;
      out[n] = -wk.dot(xi.head(n));
      return out;
    };
  }
  ext.L = op;

  // Dissipation: untouched, blind to the auxiliary covector slot.
  DissipationPotential d;
  d.psi_star = [bp, n](const Vec& z, const Vec& xi) {
    return bp->dissipation->psi_star(z.head(n), xi.head(n));
  };
  if (base.dissipation->d_xi) {
    d.d_xi = [bp, n](const Vec& z, const Vec& xi) -> Vec {
      return append(bp->dissipation->d_xi(z.head(n), xi.head(n)), 0.0);
    };
  }
  if (base.dissipation->psi) {
    d.psi = [bp, n](const Vec& z, const Vec& u) -> real {
      if (std::fabs(u[n]) > 1e-9 * (1.0 + u.norm())) return kInf;
      return bp->dissipation->psi(z.head(n), u.head(n));
    };
  }
  ext.dissipation = d;

  // The auxiliary coordinate is frozen along the flow.
  ext.flow_override = [bp, n](const Vec& z) -> Vec {
    return append(bp->flow_velocity(z.head(n)), 0.0);
  };

  ext.state_box = extend_box(base.state_box, -1.0, 1.0);
  ext.xi_box = extend_box(base.xi_box, -1.0, 1.0);
  extend_samplers(bp, ext, ext.state_box, ext.xi_box);
  propagate_fd_flag(base, ext);
  ext.validate();
  return ext;
}

Bundle bar_extend(const Bundle& base) {
  base.validate();
  require_bar_compatible("bar-extend", base);

  const BasePtr bp = std::make_shared<const Bundle>(base);
  const int n = base.dim;

  Bundle ext;
  ext.name = "bar-" + base.name;
  ext.dim = n + 1;
  ext.kind = BundleKind::Generic;

  // Entropy: total entropy minus total energy; its gradient (dS - dE, -1) is
  // annihilated by the block operator by the precondition.
  ext.S.value = [bp, n](const Vec& z) {
    const Vec zb = z.head(n);
    return bp->S.value(zb) - (bp->E->value(zb) + z[n]);
  };
  ext.S.grad = [bp, n](const Vec& z) -> Vec {
    const Vec zb = z.head(n);
    return append(bp->S.gradient(zb) - bp->E->gradient(zb), -1.0);
  };
  if (base.S.hess && base.E->hess) {
    ext.S.hess = [bp, n](const Vec& z) -> Mat {
      const Vec zb = z.head(n);
      return embed_block(bp->S.hess(zb) - bp->E->hess(zb), n);
    };
  }

  ext.E = total_energy(bp, n);
  if (base.W) ext.W = embedded_drift(bp, n);

  // Block operator: the base operator on the z-slots, nothing on the scalar.
  PoissonOperator op;
  op.apply = [bp, n](const Vec& z, const Vec& xi) -> Vec {
    return append(bp->L->apply(z.head(n), xi.head(n)), 0.0);
  };
  if (base.L->partial) {
    op.partial = [bp, n](const Vec& z, int k, const Vec& xi) -> Vec {
      if (k == n) return Vec::Zero(n + 1);
      return append(bp->L->partial(z.head(n), k, xi.head(n)), 0.0);
    };
  }
  ext.L = op;

  ext.dissipation = tilted_dissipation(bp, n);
  ext.flow_override = energy_balanced_flow(bp, n);

  ext.state_box = extend_box(base.state_box, -1.0, 3.0);
  ext.xi_box = extend_box(base.xi_box, -3.0, 3.0);
  extend_samplers(bp, ext, ext.state_box, ext.xi_box);
  propagate_fd_flag(base, ext);
  ext.validate();
  return ext;
}

Bundle interpolate_extend(const Bundle& base, real alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InvalidInput("interpolate-extend: interpolation parameter must lie in [0,1]");
  base.validate();
  if (!base.W)
    throw InvalidInput("interpolate-extend: base bundle must declare an antisymmetric drift W");
  require_bar_compatible("interpolate-extend", base);

  const BasePtr bp = std::make_shared<const Bundle>(base);
  const int n = base.dim;

  Bundle ext;
  ext.name = "interp-" + base.name;
  ext.dim = n + 1;
  ext.kind = BundleKind::Generic;

  // Entropy family S - alpha (E + e): the pure base entropy at alpha=0, the
  // bar entropy at alpha=1.
  ext.S.value = [bp, n, alpha](const Vec& z) {
    const Vec zb = z.head(n);
    return bp->S.value(zb) - alpha * (bp->E->value(zb) + z[n]);
  };
  ext.S.grad = [bp, n, alpha](const Vec& z) -> Vec {
    const Vec zb = z.head(n);
    return append(bp->S.gradient(zb) - alpha * bp->E->gradient(zb), -alpha);
  };
  if (base.S.hess && base.E->hess) {
    ext.S.hess = [bp, n, alpha](const Vec& z) -> Mat {
      const Vec zb = z.head(n);
      return embed_block((bp->S.hess(zb) - alpha * bp->E->hess(zb)).eval(), n);
    };
  }

  ext.E = total_energy(bp, n);
  ext.W = embedded_drift(bp, n);

  // Operator family: alpha times the block operator plus (1-alpha) times the
  // drift-built operator (r W, -<W,xi>).  Both summands annihilate dS_alpha
  // and dE_alpha, so the degeneracies hold along the whole family.
  PoissonOperator op;
  op.apply = [bp, n, alpha](const Vec& z, const Vec& xi) -> Vec {
    const Vec zb = z.head(n);
    const Vec xib = xi.head(n);
    const Vec wz = bp->W->value(zb);
    Vec out(n + 1);
    out.head(n) = alpha * bp->L->apply(zb, xib) + (1.0 - alpha) * (xi[n] * wz);
    out[n] = -(1.0 - alpha) * wz.dot(xib);
    return out;
  };
  if (base.L->partial && base.W->jacobian) {
    op.partial = [bp, n, alpha](const Vec& z, int k, const Vec& xi) -> Vec {
      if (k == n) return Vec::Zero(n + 1);
      const Vec zb = z.head(n);
      const Vec xib = xi.head(n);
      const Vec wk = bp->W->jacobian(zb).col(k);
      Vec out(n + 1);
      out.head(n) = alpha * bp->L->partial(zb, k, xib) + (1.0 - alpha) * (xi[n] * wk);
      out[n] = -(1.0 - alpha) * wk.dot(xib);
      return out;
    };
  }
  ext.L = op;

  ext.dissipation = tilted_dissipation(bp, n);
  // The induced flow is the same for every alpha: the alpha-dependence of
  // -dS/2 cancels against the tilt of the dual potential.
  ext.flow_override = energy_balanced_flow(bp, n);

  ext.state_box = extend_box(base.state_box, -1.0, 3.0);
  ext.xi_box = extend_box(base.xi_box, -3.0, 3.0);
  extend_samplers(bp, ext, ext.state_box, ext.xi_box);
  propagate_fd_flag(base, ext);
  ext.validate();
  return ext;
}

}  // namespace vds
