#pragma once

/*
 * Tensor-product grids for sampled functions: per-axis [lo, hi] with a node
 * count, uniform spacing, row-major storage with the LAST axis fastest.
 */

#include <cstddef>
#include <vector>

#include "vds/numerics.hpp"

namespace vds {

struct Axis {
  real lo{0}, hi{0};
  int n{0};
  real h() const { return (hi - lo) / static_cast<real>(n - 1); }
  // Affine-combination node formula: hits both endpoints exactly, and on a
  // symmetric axis (hi == -lo) satisfies node(n-1-i) == -node(i) bitwise,
  // which evenness/oddness identities downstream rely on.
  real node(int i) const {
    if (i == 0) return lo;
    if (i == n - 1) return hi;
    return (static_cast<real>(n - 1 - i) * lo + static_cast<real>(i) * hi) /
           static_cast<real>(n - 1);
  }
  void validate() const {
    if (n < 3) throw InvalidInput("Axis: at least 3 nodes per axis required");
    if (!(lo < hi)) throw InvalidInput("Axis: requires lo < hi");
    if (!is_finite(lo) || !is_finite(hi)) throw InvalidInput("Axis: bounds must be finite");
  }
};

struct GridSpec {
  std::vector<Axis> axes;

  int dim() const { return static_cast<int>(axes.size()); }

  std::size_t size() const {
    std::size_t s = 1;
    for (const Axis& a : axes) s *= static_cast<std::size_t>(a.n);
    return s;
  }

  // Row-major flat index, last axis fastest.
  std::size_t index(const std::vector<int>& multi) const {
    std::size_t flat = 0;
    for (int d = 0; d < dim(); ++d) flat = flat * static_cast<std::size_t>(axes[d].n) + static_cast<std::size_t>(multi[d]);
    return flat;
  }

  void unindex(std::size_t flat, std::vector<int>& multi) const {
    multi.resize(axes.size());
    for (int d = dim() - 1; d >= 0; --d) {
      multi[d] = static_cast<int>(flat % static_cast<std::size_t>(axes[d].n));
      flat /= static_cast<std::size_t>(axes[d].n);
    }
  }

  Vec node(const std::vector<int>& multi) const {
    Vec v(dim());
    for (int d = 0; d < dim(); ++d) v[d] = axes[d].node(multi[d]);
    return v;
  }

  real max_spacing() const {
    real h = 0;
    for (const Axis& a : axes) h = std::max(h, a.h());
    return h;
  }

  void validate() const {
    if (axes.empty()) throw InvalidInput("GridSpec: no axes");
    for (const Axis& a : axes) a.validate();
  }

  static GridSpec uniform(int dim, real lo, real hi, int n) {
    GridSpec g;
    g.axes.assign(static_cast<std::size_t>(dim), Axis{lo, hi, n});
    return g;
  }
};

}  // namespace vds
