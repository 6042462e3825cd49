#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eventcon {

// Lowercases (Unicode-aware), strips punctuation at token boundaries,
// collapses whitespace and trims. Idempotent.
std::string normalize(std::string_view s);

// normalize() applied to a single token; may return an empty string.
std::string normalize_token(std::string_view token);

std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

// Strict numeric parsing: the whole field must be consumed.
bool parse_double(std::string_view s, double& out);
bool parse_int64(std::string_view s, long long& out);

}  // namespace eventcon
