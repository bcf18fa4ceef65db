#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace karpa::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Trim, ASCII case-fold and collapse internal whitespace runs to one space.
std::string normalize_answer(std::string_view s);

}  // namespace karpa::text
