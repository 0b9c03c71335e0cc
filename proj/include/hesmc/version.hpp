#pragma once

namespace hesmc {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "hesmc";

}  // namespace hesmc
