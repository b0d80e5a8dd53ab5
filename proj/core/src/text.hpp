#pragma once
#include <string>
#include <string_view>
#include <vector>

namespace flowmine::detail {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Lowercase, trim and collapse internal whitespace runs to one space.
std::string normalize_form(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool has_line_break(std::string_view s);
// Fixed 6-decimal formatting used by every emitted artifact.
std::string fixed6(double v);

} // namespace flowmine::detail
