#include "vds/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace vds {

namespace {

// ---------------------------------------------------------------------------
// 1-D core.
// ---------------------------------------------------------------------------

struct Attainment {
  real value = -kInf;
  bool interior = false;  // some maximizer is strictly inside the grid
  bool any = false;       // some finite node exists
};

// Exhaustive scan at a single dual point; boundary status refers to the
// ORIGINAL grid index (0 or n-1), independent of where f happens to be finite.
Attainment brute_at_1d(const std::vector<real>& vs, const std::vector<real>& fs, real xi) {
  Attainment b;
  const int n = static_cast<int>(vs.size());
  for (int i = 0; i < n; ++i) {
    if (!is_finite(fs[i])) continue;
    const real val = vs[i] * xi - fs[i];
    if (!b.any || val > b.value) {
      b.value = val;
      b.interior = (i > 0 && i < n - 1);
      b.any = true;
    } else if (val == b.value) {
      b.interior = b.interior || (i > 0 && i < n - 1);
    }
  }
  return b;
}

// Lower convex hull over the finite nodes, RETAINING collinear vertices so
// that maximizer ties at interior nodes stay visible to the fast path.
std::vector<int> lower_hull(const std::vector<real>& vs, const std::vector<real>& fs) {
  std::vector<int> h;
  const int n = static_cast<int>(vs.size());
  for (int i = 0; i < n; ++i) {
    if (!is_finite(fs[i])) continue;
    while (h.size() >= 2) {
      const int a = h[h.size() - 2], b = h[h.size() - 1];
      // Pop b when it lies strictly above the segment a--i.
      const long double lhs = (static_cast<long double>(fs[b]) - fs[a]) *
                              (static_cast<long double>(vs[i]) - vs[a]);
      const long double rhs = (static_cast<long double>(fs[i]) - fs[a]) *
                              (static_cast<long double>(vs[b]) - vs[a]);
      if (lhs > rhs)
        h.pop_back();
      else
        break;
    }
    h.push_back(i);
  }
  return h;
}

// Fast 1-D conjugation: hull + two-pointer sweep over ascending dual nodes.
// Whenever the sweep concludes "maximized only on the boundary" it defers to
// the exhaustive scan for that dual node, so marking semantics (and values)
// agree with conjugate_brute exactly.
void conjugate_1d(const std::vector<real>& vs, const std::vector<real>& fs,
                  const std::vector<real>& xis, std::vector<real>& out) {
  const int n = static_cast<int>(vs.size());
  const std::vector<int> hull = lower_hull(vs, fs);
  const int hn = static_cast<int>(hull.size());
  out.resize(xis.size());
  int k = 0;
  for (std::size_t j = 0; j < xis.size(); ++j) {
    const real xi = xis[j];
    auto val = [&](int hk) { return vs[hull[hk]] * xi - fs[hull[hk]]; };
    while (k + 1 < hn && val(k + 1) >= val(k)) ++k;
    // Two-pointer state must not regress for later xi; scan the tie run left
    // without moving k.
    const real best = val(k);
    bool interior = false;
    for (int t = k; t >= 0 && val(t) == best; --t) {
      const int idx = hull[t];
      if (idx > 0 && idx < n - 1) {
        interior = true;
        break;
      }
    }
    if (!interior) {
      // Definitive semantics from the exhaustive scan (covers rounding ties
      // at off-hull nodes).
      const Attainment b = brute_at_1d(vs, fs, xi);
      out[j] = b.interior ? b.value : kInf;
    } else {
      out[j] = best;
    }
  }
}

struct FlatNodes {
  // Precomputed node coordinates and values for exhaustive k-D search.
  std::vector<Vec> coords;
  std::vector<real> vals;
};

FlatNodes flatten(const SampledFunction& f) {
  FlatNodes fn;
  const std::size_t N = f.grid.size();
  fn.coords.reserve(N);
  fn.vals.reserve(N);
  std::vector<int> multi;
  for (std::size_t flat = 0; flat < N; ++flat) {
    f.grid.unindex(flat, multi);
    fn.coords.push_back(f.grid.node(multi));
    fn.vals.push_back(f.values[flat]);
  }
  return fn;
}

bool multi_is_interior(const GridSpec& g, const std::vector<int>& multi) {
  for (int d = 0; d < g.dim(); ++d)
    if (multi[d] == 0 || multi[d] == g.axes[d].n - 1) return false;
  return true;
}

SampledFunction conjugate_brute_impl(const SampledFunction& f, const GridSpec& dual_grid) {
  const FlatNodes fn = flatten(f);
  const std::size_t N = fn.vals.size();
  const int k = f.grid.dim();
  std::vector<bool> interior_flag(N);
  {
    std::vector<int> multi;
    for (std::size_t flat = 0; flat < N; ++flat) {
      f.grid.unindex(flat, multi);
      interior_flag[flat] = multi_is_interior(f.grid, multi);
    }
  }
  SampledFunction g;
  g.grid = dual_grid;
  g.hint = Convexity::ClaimedConvex;
  g.values.resize(dual_grid.size());
  std::vector<int> dmulti;
  for (std::size_t dj = 0; dj < g.values.size(); ++dj) {
    dual_grid.unindex(dj, dmulti);
    const Vec xi = dual_grid.node(dmulti);
    real best = -kInf;
    bool any = false, interior = false;
    for (std::size_t i = 0; i < N; ++i) {
      if (!is_finite(fn.vals[i])) continue;
      real dot = 0;
      for (int d = 0; d < k; ++d) dot += fn.coords[i][d] * xi[d];
      const real val = dot - fn.vals[i];
      if (!any || val > best) {
        best = val;
        interior = interior_flag[i];
        any = true;
      } else if (val == best) {
        interior = interior || interior_flag[i];
      }
    }
    g.values[dj] = interior ? best : kInf;
  }
  return g;
}

SampledFunction conjugate_separable(const SampledFunction& f, const GridSpec& dual_grid) {
  // f is declared to be a sum of one-variable functions; recover per-axis
  // profiles through a finite base node c:
  //   f(x) = sum_a slice_a(x_a) - (k-1) f(c),   slice_a(t) = f(c with x_a = t)
  // and conjugate each profile on its own dual axis.
  const int k = f.grid.dim();
  std::vector<int> c;
  {
    real best = kInf;
    std::vector<int> multi;
    for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
      if (is_finite(f.values[flat]) && f.values[flat] < best) {
        best = f.values[flat];
        f.grid.unindex(flat, multi);
        c = multi;
      }
    }
    if (c.empty()) throw DegenerateFunction("conjugate: function has no finite values");
  }
  const real fc = f.at(c);
  std::vector<std::vector<real>> gprofiles(k);
  for (int d = 0; d < k; ++d) {
    const Axis& pa = f.grid.axes[d];
    const Axis& da = dual_grid.axes[d];
    std::vector<real> vs(pa.n), fs(pa.n), xis(da.n);
    std::vector<int> multi = c;
    for (int i = 0; i < pa.n; ++i) {
      vs[i] = pa.node(i);
      multi[d] = i;
      fs[i] = f.at(multi);
    }
    bool any_finite = false;
    for (real v : fs) any_finite = any_finite || is_finite(v);
    if (!any_finite)
      throw DegenerateFunction("conjugate: separable slice has no finite values");
    for (int j = 0; j < da.n; ++j) xis[j] = da.node(j);
    conjugate_1d(vs, fs, xis, gprofiles[d]);
  }
  SampledFunction g;
  g.grid = dual_grid;
  g.hint = Convexity::ClaimedConvex;
  g.values.resize(dual_grid.size());
  std::vector<int> dmulti;
  const real offset = static_cast<real>(k - 1) * fc;
  for (std::size_t dj = 0; dj < g.values.size(); ++dj) {
    dual_grid.unindex(dj, dmulti);
    real sum = 0;
    for (int d = 0; d < k; ++d) sum += gprofiles[d][static_cast<std::size_t>(dmulti[d])];
    g.values[dj] = sum + offset;
  }
  return g;
}

}  // namespace

SampledFunction conjugate_brute(const SampledFunction& f, const GridSpec& dual_grid) {
  f.validate();
  dual_grid.validate();
  if (dual_grid.dim() != f.grid.dim())
    throw InvalidInput("conjugate: primal/dual dimension mismatch");
  if (f.grid.dim() > 3) throw InvalidInput("conjugate: exhaustive path supports dimension <= 3");
  if (f.all_infinite()) throw DegenerateFunction("conjugate: function is identically infinite");
  return conjugate_brute_impl(f, dual_grid);
}

SampledFunction conjugate(const SampledFunction& f, const GridSpec& dual_grid,
                          const ConjugateOptions& opts) {
  f.validate();
  dual_grid.validate();
  if (dual_grid.dim() != f.grid.dim())
    throw InvalidInput("conjugate: primal/dual dimension mismatch");
  if (f.all_infinite()) throw DegenerateFunction("conjugate: function is identically infinite");
  if (opts.separable) return conjugate_separable(f, dual_grid);
  if (f.grid.dim() == 1) {
    const Axis& pa = f.grid.axes[0];
    const Axis& da = dual_grid.axes[0];
    std::vector<real> vs(pa.n), xis(da.n), out;
    for (int i = 0; i < pa.n; ++i) vs[i] = pa.node(i);
    for (int j = 0; j < da.n; ++j) xis[j] = da.node(j);
    conjugate_1d(vs, f.values, xis, out);
    SampledFunction g;
    g.grid = dual_grid;
    g.hint = Convexity::ClaimedConvex;
    g.values = std::move(out);
    return g;
  }
  if (f.grid.dim() > 3)
    throw InvalidInput("conjugate: dimension > 3 requires the declared-separable path");
  return conjugate_brute_impl(f, dual_grid);
}

GridSpec fitted_dual_grid(const SampledFunction& f) {
  const int k = f.grid.dim();
  GridSpec dual;
  dual.axes.resize(static_cast<std::size_t>(k));
  // Interior evaluation window: central two-thirds along every axis.
  std::vector<int> wlo(static_cast<std::size_t>(k)), whi(static_cast<std::size_t>(k));
  for (int d = 0; d < k; ++d) {
    const int n = f.grid.axes[d].n;
    const int margin = std::max(1, n / 6);
    wlo[d] = margin;
    whi[d] = n - 1 - margin;
  }
  std::vector<int> multi;
  for (int d = 0; d < k; ++d) {
    real smin = kInf, smax = -kInf;
    const real h = f.grid.axes[d].h();
    for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
      f.grid.unindex(flat, multi);
      bool in_window = true;
      for (int e = 0; e < k; ++e)
        if (multi[e] < wlo[e] || multi[e] > whi[e]) in_window = false;
      if (!in_window || multi[d] >= whi[d]) continue;
      std::vector<int> next = multi;
      next[d] = multi[d] + 1;
      const real a = f.values[flat], b = f.at(next);
      if (!is_finite(a) || !is_finite(b)) continue;
      const real s = (b - a) / h;
      smin = std::min(smin, s);
      smax = std::max(smax, s);
    }
    if (!(smin <= smax))
      throw InvalidInput("fitted_dual_grid: no finite slopes in the interior window");
    real pad = 0.05 * (smax - smin);
    if (pad == 0.0) pad = 0.5;
    dual.axes[static_cast<std::size_t>(d)] = Axis{smin - pad, smax + pad, f.grid.axes[d].n};
  }
  return dual;
}

CheckReport biconjugate_check(const SampledFunction& f) {
  if (auto viol = f.convexity_violation())
    return CheckReport::not_applicable("biconjugation", "non-convex input: " + viol->describe());
  const GridSpec dual = fitted_dual_grid(f);
  const SampledFunction g = conjugate(f, dual);
  const SampledFunction h = conjugate(g, f.grid);

  const int k = f.grid.dim();
  std::vector<int> wlo(static_cast<std::size_t>(k)), whi(static_cast<std::size_t>(k));
  for (int d = 0; d < k; ++d) {
    const int n = f.grid.axes[d].n;
    const int margin = std::max(1, n / 6);
    wlo[d] = margin;
    whi[d] = n - 1 - margin;
  }
  real residual = 0;
  long samples = 0;
  std::string worst;
  std::vector<int> multi;
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    f.grid.unindex(flat, multi);
    bool in_window = true;
    for (int e = 0; e < k; ++e)
      if (multi[e] < wlo[e] || multi[e] > whi[e]) in_window = false;
    if (!in_window || !is_finite(f.values[flat])) continue;
    ++samples;
    const real r = std::fabs(h.values[flat] - f.values[flat]);  // +inf propagates honestly
    if (r > residual || samples == 1) {
      residual = r;
      worst = format_point(f.grid.node(multi));
    }
  }
  return CheckReport::make("biconjugation", residual, tol_legendre(f.grid.max_spacing()), samples,
                           worst, "h2");
}

real young_gap(const SampledFunction& f, const SampledFunction& fstar) {
  f.validate();
  fstar.validate();
  if (f.grid.dim() != fstar.grid.dim())
    throw InvalidInput("young_gap: primal/dual dimension mismatch");
  const FlatNodes fp = flatten(f);
  const FlatNodes fd = flatten(fstar);
  const int k = f.grid.dim();
  real gap = kInf;
  for (std::size_t i = 0; i < fp.vals.size(); ++i) {
    if (!is_finite(fp.vals[i])) continue;
    for (std::size_t j = 0; j < fd.vals.size(); ++j) {
      if (!is_finite(fd.vals[j])) continue;
      real dot = 0;
      for (int d = 0; d < k; ++d) dot += fp.coords[i][d] * fd.coords[j][d];
      gap = std::min(gap, fp.vals[i] + fd.vals[j] - dot);
    }
  }
  return gap;
}

ScanResult conjugate_scan(const std::function<real(const Vec&)>& f, const Box& domain,
                          int nodes_per_axis, const Vec& xi) {
  domain.validate();
  const int k = domain.dim();
  if (k > 3) throw InvalidInput("conjugate_scan: dimension <= 3 required");
  if (nodes_per_axis < 3) throw InvalidInput("conjugate_scan: at least 3 nodes per axis");
  if (xi.size() != k) throw InvalidInput("conjugate_scan: covector dimension mismatch");
  GridSpec g;
  for (int d = 0; d < k; ++d) g.axes.push_back(Axis{domain.lo[d], domain.hi[d], nodes_per_axis});
  ScanResult res;
  bool any = false, interior = false;
  std::vector<int> multi;
  const std::size_t N = g.size();
  for (std::size_t flat = 0; flat < N; ++flat) {
    g.unindex(flat, multi);
    const Vec v = g.node(multi);
    const real fv = f(v);
    if (!is_finite(fv)) continue;
    const real val = v.dot(xi) - fv;
    if (!any || val > res.value) {
      res.value = val;
      res.argmax = v;
      interior = multi_is_interior(g, multi);
      any = true;
    } else if (val == res.value) {
      interior = interior || multi_is_interior(g, multi);
    }
  }
  if (!any) {
    res.value = -kInf;
    res.boundary_only = false;
    return res;
  }
  res.boundary_only = !interior;
  return res;
}

}  // namespace vds
