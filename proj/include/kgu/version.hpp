#pragma once

#include <string_view>

namespace kgu {

inline constexpr std::string_view kToolName = "kgu";
inline constexpr std::string_view kToolVersion = "0.1.0";

}  // namespace kgu
