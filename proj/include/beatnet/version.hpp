#pragma once

namespace beatnet {

inline constexpr const char* kToolName = "beatnet";
inline constexpr const char* kVersion = "1.0.0";

}  // namespace beatnet
