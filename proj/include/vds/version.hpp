#pragma once

namespace vds {

inline constexpr const char* kToolName = "vds";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace vds
