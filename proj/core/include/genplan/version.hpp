#pragma once

#include <cstdint>

namespace genplan {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::uint16_t kToolVersionMajor = 0;
inline constexpr std::uint16_t kToolVersionMinor = 1;
inline constexpr std::uint16_t kToolVersionPatch = 0;

}  // namespace genplan
