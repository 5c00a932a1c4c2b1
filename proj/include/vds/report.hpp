// Report assembly and comparison.
//
// A run writes two JSON files: report.json, whose bytes are a pure function of
// the experiment object (kind, builtin, seed, tol_scale, params), and
// metadata.json, which holds everything environment-dependent (timestamp,
// elapsed time, thread count, output path).  The report embeds a FNV-1a hash
// of the experiment object so two reports can be recognized as runs of the
// same experiment without comparing their configs field by field.
//
// compare_reports lines up two reports check by check for step-halving
// studies: for every check name present in both it tabulates the two
// residuals and their ratio, carrying the check's order tag so the caller
// can flag which rows are expected to shrink fourfold under h -> h/2.

#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "vds/check.hpp"
#include "vds/config.hpp"

namespace vds {

// One check rendered as JSON (NaN residuals/tolerances become null).
nlohmann::ordered_json check_to_json(const CheckReport& c);

// 64-bit FNV-1a over the bytes of `data`, as 16 lowercase hex digits.
std::string fnv1a64_hex(const std::string& data);

// "fnv1a:<16 hex>" over the serialized experiment object.
std::string config_hash(const ExperimentConfig& cfg);

struct CompareRow {
  std::string check_name;
  real residual_a{0};
  real residual_b{0};
  real ratio{0};       // residual_a / residual_b; NaN when not meaningful
  std::string order;   // "exact", "h2", or "none" (from report a)
};

struct CompareResult {
  bool refused{false};       // the two reports are not comparable
  std::string message;       // reason for refusal, empty otherwise
  bool identical{false};     // the two reports are byte-identical
  std::vector<CompareRow> rows;
  std::vector<std::string> only_a;  // check names present only in report a
  std::vector<std::string> only_b;  // check names present only in report b
};

// Line up two parsed report.json objects.  Refuses when the experiment kinds
// differ; otherwise pairs checks by name in report a's order.
CompareResult compare_reports(const nlohmann::json& a, const nlohmann::json& b);

}  // namespace vds
