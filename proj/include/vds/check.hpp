#pragma once

/*
 * Uniform result record for every structural identity check in the library.
 * Invariant: verdict == Pass exactly when residual <= tolerance; NotApplicable
 * carries NaN residual/tolerance and a note explaining why the check could
 * not run.  `order` annotates how the residual is expected to behave under
 * grid refinement ("exact" = rounding-level, "h2" = second order, "none").
 */

#include <cmath>
#include <sstream>
#include <string>

#include "vds/numerics.hpp"

namespace vds {

enum class Verdict { Pass, Fail, NotApplicable };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "not-applicable";
  }
}

struct CheckReport {
  std::string check_name;
  real residual{0};
  real tolerance{0};
  long sample_count{0};
  std::string worst_case_location;
  Verdict verdict{Verdict::Pass};
  std::string note;
  std::string order{"none"};

  static CheckReport make(const std::string& name, real residual, real tolerance, long samples,
                          const std::string& worst = "", const std::string& order = "none") {
    CheckReport r;
    r.check_name = name;
    r.residual = residual;
    r.tolerance = tolerance;
    r.sample_count = samples;
    r.worst_case_location = worst;
    r.order = order;
    r.verdict = (residual <= tolerance) ? Verdict::Pass : Verdict::Fail;
    return r;
  }

  static CheckReport not_applicable(const std::string& name, const std::string& why) {
    CheckReport r;
    r.check_name = name;
    r.residual = kNaN;
    r.tolerance = kNaN;
    r.sample_count = 0;
    r.verdict = Verdict::NotApplicable;
    r.note = why;
    return r;
  }

  bool passed() const { return verdict == Verdict::Pass; }
  bool failed() const { return verdict == Verdict::Fail; }

  std::string one_line() const {
    std::ostringstream os;
    os << check_name << ": ";
    if (verdict == Verdict::NotApplicable) {
      os << "NOT-APPLICABLE (" << note << ")";
    } else {
      os << (passed() ? "PASS" : "FAIL") << " (residual=" << residual << ", tol=" << tolerance
         << ", samples=" << sample_count;
      if (!worst_case_location.empty()) os << ", worst at " << worst_case_location;
      os << ")";
    }
    return os.str();
  }
};

// Format a state/covector location for worst-case reporting.  Long vectors
// (grid fields) are elided after the first few components.
inline std::string format_point(const Vec& z) {
  constexpr int kShown = 8;
  std::ostringstream os;
  os << "(";
  const int shown = z.size() > kShown ? kShown : static_cast<int>(z.size());
  for (int i = 0; i < shown; ++i) os << (i ? "," : "") << z[i];
  if (z.size() > kShown) os << ",... dim=" << z.size();
  os << ")";
  return os.str();
}

inline std::string format_point(const Vec& z, const Vec& xi) {
  return "z=" + format_point(z) + " xi=" + format_point(xi);
}

}  // namespace vds
