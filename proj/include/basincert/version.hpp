#pragma once

namespace basincert {

inline constexpr const char* kToolName = "basin-cert";
inline constexpr const char* kVersion = "0.1.0";

} // namespace basincert
