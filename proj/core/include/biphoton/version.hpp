#pragma once

namespace biphoton {

inline constexpr const char* kToolName = "biphoton";
inline constexpr const char* kToolVersion = "0.1.0";

} // namespace biphoton
