#pragma once

/*
 * A function sampled on a uniform tensor grid, with +infinity admitted as an
 * "outside the effective domain" marker.  Carries a convexity hint:
 *  - ClaimedConvex inputs must pass a midpoint convexity screen along every
 *    axis (relative slack kTolConvexRel); violations are reported with the
 *    offending location.
 *  - Unknown inputs are accepted as-is; duality transforms then operate on
 *    the convex envelope.
 * JSON serialization round-trips values to full double precision, writing
 * infinities as the string "inf".
 */

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vds/grid.hpp"
#include "vds/numerics.hpp"

namespace vds {

enum class Convexity { Unknown, ClaimedConvex };

struct ConvexityViolation {
  std::vector<int> at;  // multi-index of the midpoint node
  int axis{0};
  real defect{0};  // negative second difference found there
  std::string describe() const;
};

struct SampledFunction {
  GridSpec grid;
  std::vector<real> values;  // row-major, last axis fastest; +inf allowed
  Convexity hint{Convexity::Unknown};

  real at(std::size_t flat) const { return values[flat]; }
  real at(const std::vector<int>& multi) const { return values[grid.index(multi)]; }

  // Structural validation: grid sanity, value-count match, no NaN.
  // ClaimedConvex additionally runs the midpoint screen and throws
  // InvalidInput naming the first violating location.
  void validate() const;

  // Midpoint convexity screen; nullopt means no violation found.
  std::optional<ConvexityViolation> convexity_violation() const;

  bool all_infinite() const;

  std::string to_json() const;
  static SampledFunction from_json(const std::string& text);

  // Sample a callable onto a grid.
  static SampledFunction sample(const GridSpec& g, const std::function<real(const Vec&)>& f,
                                Convexity hint = Convexity::Unknown);
};

}  // namespace vds
