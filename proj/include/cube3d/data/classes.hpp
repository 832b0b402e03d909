#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

#include "cube3d/error.hpp"

namespace cube3d::data {

inline constexpr std::size_t kNumClasses = 14;

// Canonical order used for label indices, score columns and report rows.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames{
    "Abuse",   "Arrest",   "Arson",    "Assault",     "Burglary", "Explosion", "Fight",
    "Normal",  "RoadAccidents", "Robbery", "Shooting", "Shoplifting", "Stealing", "Vandalism"};

inline constexpr std::size_t kNormal = 7;

inline std::string_view class_name(std::size_t index) {
  if (index >= kNumClasses) fail(ErrorKind::label, "class index " + std::to_string(index) + " out of range");
  return kClassNames[index];
}

inline std::size_t class_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kClassNames[i] == name) return i;
  fail(ErrorKind::validation, "unknown class label '" + std::string(name) + "'");
}

}  // namespace cube3d::data
