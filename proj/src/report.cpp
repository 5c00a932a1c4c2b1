#include "vds/report.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

namespace vds {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json check_to_json(const CheckReport& c) {
  ordered_json j;
  j["check_name"] = c.check_name;
  if (std::isfinite(c.residual))
    j["residual"] = c.residual;
  else
    j["residual"] = nullptr;
  if (std::isfinite(c.tolerance))
    j["tolerance"] = c.tolerance;
  else
    j["tolerance"] = nullptr;
  j["sample_count"] = c.sample_count;
  j["worst_case_location"] = c.worst_case_location;
  j["verdict"] = verdict_name(c.verdict);
  j["note"] = c.note;
  j["order"] = c.order;
  return j;
}

std::string fnv1a64_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char byte : data) {
    h ^= byte;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  return "fnv1a:" + fnv1a64_hex(cfg.experiment_object().dump());
}

namespace {

// Pull (name, residual, order) triples out of a report's checks array.
struct CheckRow {
  std::string name;
  real residual;
  std::string order;
};

std::vector<CheckRow> extract_checks(const json& report) {
  std::vector<CheckRow> rows;
  if (!report.contains("checks") || !report["checks"].is_array()) return rows;
  for (const json& c : report["checks"]) {
    CheckRow r;
    r.name = c.value("check_name", std::string("?"));
    r.residual = (c.contains("residual") && c["residual"].is_number())
                     ? c["residual"].get<real>()
                     : std::numeric_limits<real>::quiet_NaN();
    r.order = c.value("order", std::string("none"));
    rows.push_back(r);
  }
  return rows;
}

std::string report_kind(const json& report) {
  if (report.contains("experiment") && report["experiment"].contains("kind") &&
      report["experiment"]["kind"].is_string())
    return report["experiment"]["kind"].get<std::string>();
  return "";
}

}  // namespace

CompareResult compare_reports(const json& a, const json& b) {
  CompareResult res;
  const std::string ka = report_kind(a);
  const std::string kb = report_kind(b);
  if (ka.empty() || kb.empty()) {
    res.refused = true;
    res.message = "at least one report carries no experiment kind";
    return res;
  }
  if (ka != kb) {
    res.refused = true;
    res.message = "experiment kinds differ: '" + ka + "' vs '" + kb + "'";
    return res;
  }
  res.identical = (a.dump() == b.dump());

  const std::vector<CheckRow> rows_a = extract_checks(a);
  const std::vector<CheckRow> rows_b = extract_checks(b);
  auto find_b = [&](const std::string& name) -> const CheckRow* {
    for (const CheckRow& r : rows_b)
      if (r.name == name) return &r;
    return nullptr;
  };

  for (const CheckRow& ra : rows_a) {
    const CheckRow* rb = find_b(ra.name);
    if (!rb) {
      res.only_a.push_back(ra.name);
      continue;
    }
    CompareRow out;
    out.check_name = ra.name;
    out.residual_a = ra.residual;
    out.residual_b = rb->residual;
    out.order = ra.order;
    const bool meaningful = std::isfinite(ra.residual) && std::isfinite(rb->residual) &&
                            rb->residual > 0.0;
    out.ratio = meaningful ? ra.residual / rb->residual
                           : std::numeric_limits<real>::quiet_NaN();
    res.rows.push_back(out);
  }
  for (const CheckRow& rb : rows_b) {
    bool matched = false;
    for (const CheckRow& ra : rows_a)
      if (ra.name == rb.name) {
        matched = true;
        break;
      }
    if (!matched) res.only_b.push_back(rb.name);
  }
  return res;
}

}  // namespace vds
