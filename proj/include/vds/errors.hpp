#pragma once

/*
 * Error taxonomy used across the library.  Each class maps onto one CLI exit
 * code so that scripted callers can branch on the failure mode:
 *   InvalidInput / ConfigError   -> exit 2 (malformed request; message carries
 *                                   the offending key path where applicable)
 *   NumericalRefusal             -> exit 3 (a stability or hypothesis
 *                                   precondition failed; no partial outputs)
 *   DegenerateFunction           -> exit 3 (an input is identically infinite
 *                                   or otherwise carries no information)
 * Anything else escaping to main -> exit 4 (internal error).
 */

#include <stdexcept>
#include <string>

namespace vds {

struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  // `path` is a JSON-pointer-style location of the offending key, e.g. "/kinetic/np".
  ConfigError(const std::string& path, const std::string& msg)
      : std::runtime_error(path + ": " + msg), key_path(path) {}
  std::string key_path;
};

struct NumericalRefusal : std::runtime_error {
  explicit NumericalRefusal(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateFunction : std::runtime_error {
  explicit DegenerateFunction(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vds
