#include "vds/sampled_function.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace vds {

std::string ConvexityViolation::describe() const {
  std::ostringstream os;
  os << "midpoint convexity violated along axis " << axis << " at node (";
  for (std::size_t i = 0; i < at.size(); ++i) os << (i ? "," : "") << at[i];
  os << "), second difference " << defect;
  return os.str();
}

void SampledFunction::validate() const {
  grid.validate();
  if (values.size() != grid.size())
    throw InvalidInput("SampledFunction: value count does not match grid size");
  for (real v : values)
    if (std::isnan(v)) throw InvalidInput("SampledFunction: NaN value");
  if (hint == Convexity::ClaimedConvex) {
    if (auto viol = convexity_violation())
      throw InvalidInput("SampledFunction: " + viol->describe());
  }
}

std::optional<ConvexityViolation> SampledFunction::convexity_violation() const {
  // Along each axis: f(i-1) + f(i+1) - 2 f(i) >= -tol * scale for finite
  // triples.  A finite pair flanking an infinite midpoint is also a violation
  // (the effective domain of a convex function has no interior holes).
  std::vector<int> multi;
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    grid.unindex(flat, multi);
    for (int d = 0; d < grid.dim(); ++d) {
      const int i = multi[d];
      if (i == 0 || i == grid.axes[d].n - 1) continue;
      std::vector<int> lo = multi, hi = multi;
      lo[d] = i - 1;
      hi[d] = i + 1;
      const real fl = at(lo), fm = values[flat], fh = at(hi);
      if (!is_finite(fl) || !is_finite(fh)) continue;
      if (!is_finite(fm)) {
        return ConvexityViolation{multi, d, -kInf};
      }
      const real second = fl + fh - 2.0 * fm;
      const real scale = std::max({1.0, std::fabs(fl), std::fabs(fm), std::fabs(fh)});
      if (second < -kTolConvexRel * scale) {
        return ConvexityViolation{multi, d, second};
      }
    }
  }
  return std::nullopt;
}

bool SampledFunction::all_infinite() const {
  for (real v : values)
    if (is_finite(v)) return false;
  return true;
}

std::string SampledFunction::to_json() const {
  nlohmann::ordered_json j;
  j["axes"] = nlohmann::ordered_json::array();
  for (const Axis& a : grid.axes) {
    nlohmann::ordered_json ja;
    ja["lo"] = a.lo;
    ja["hi"] = a.hi;
    ja["n"] = a.n;
    j["axes"].push_back(ja);
  }
  j["convexity"] = (hint == Convexity::ClaimedConvex) ? "claimed-convex" : "unknown";
  nlohmann::ordered_json vals = nlohmann::ordered_json::array();
  for (real v : values) {
    if (is_finite(v))
      vals.push_back(v);
    else
      vals.push_back("inf");
  }
  j["values"] = std::move(vals);
  return j.dump();
}

SampledFunction SampledFunction::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("SampledFunction: bad JSON: ") + e.what());
  }
  SampledFunction f;
  if (!j.contains("axes") || !j["axes"].is_array())
    throw InvalidInput("SampledFunction: missing axes array");
  for (const auto& ja : j["axes"]) {
    Axis a;
    a.lo = ja.at("lo").get<real>();
    a.hi = ja.at("hi").get<real>();
    a.n = ja.at("n").get<int>();
    f.grid.axes.push_back(a);
  }
  const std::string hint = j.value("convexity", "unknown");
  if (hint == "claimed-convex")
    f.hint = Convexity::ClaimedConvex;
  else if (hint == "unknown")
    f.hint = Convexity::Unknown;
  else
    throw InvalidInput("SampledFunction: unknown convexity tag '" + hint + "'");
  if (!j.contains("values") || !j["values"].is_array())
    throw InvalidInput("SampledFunction: missing values array");
  for (const auto& jv : j["values"]) {
    if (jv.is_string()) {
      if (jv.get<std::string>() == "inf")
        f.values.push_back(kInf);
      else
        throw InvalidInput("SampledFunction: unrecognized value marker '" + jv.get<std::string>() + "'");
    } else {
      f.values.push_back(jv.get<real>());
    }
  }
  f.validate();
  return f;
}

SampledFunction SampledFunction::sample(const GridSpec& g, const std::function<real(const Vec&)>& fn,
                                        Convexity hint) {
  SampledFunction f;
  f.grid = g;
  f.hint = hint;
  f.values.resize(g.size());
  std::vector<int> multi;
  for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
    g.unindex(flat, multi);
    f.values[flat] = fn(g.node(multi));
  }
  return f;
}

}  // namespace vds
