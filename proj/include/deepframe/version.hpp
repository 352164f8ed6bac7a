#pragma once

namespace deepframe {

inline constexpr const char* kToolName = "deepframe";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace deepframe
