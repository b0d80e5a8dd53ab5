#pragma once
#include <cmath>

#include <json.hpp>

namespace flowmine::detail {

using ordered_json = nlohmann::ordered_json;

// Rounds to 6 decimals so structured artifacts stay diff-stable.
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

} // namespace flowmine::detail
