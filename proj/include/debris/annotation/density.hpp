#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "debris/common/error.hpp"

namespace debris::annotation {

enum class DensityLevel : std::uint8_t { kNoDebris = 0, kLowDensity = 1, kHighDensity = 2 };

inline constexpr int kNumLevels = 3;
inline constexpr std::array<DensityLevel, kNumLevels> kAllLevels = {
    DensityLevel::kNoDebris, DensityLevel::kLowDensity, DensityLevel::kHighDensity};

constexpr int to_int(DensityLevel level) { return static_cast<int>(level); }

inline DensityLevel level_from_int(int value) {
  if (value < 0 || value >= kNumLevels)
    throw ContractError("density level must be 0, 1 or 2 (got " + std::to_string(value) + ")");
  return static_cast<DensityLevel>(value);
}

// Candidate text prompts, indexed by level.
constexpr std::string_view text_prompt(DensityLevel level) {
  switch (level) {
    case DensityLevel::kNoDebris:
      return "no debris";
    case DensityLevel::kLowDensity:
      return "debris at low-density";
    case DensityLevel::kHighDensity:
      return "debris at high-density";
  }
  return "";
}

constexpr std::string_view level_name(DensityLevel level) {
  switch (level) {
    case DensityLevel::kNoDebris:
      return "no-debris";
    case DensityLevel::kLowDensity:
      return "low-density";
    case DensityLevel::kHighDensity:
      return "high-density";
  }
  return "";
}

}  // namespace debris::annotation
