#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace litpipe::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

/// Whitespace-delimited tokens.
std::vector<std::string> split_words(std::string_view s);
std::size_t count_words(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Keeps at most `max_chars` bytes without cutting a UTF-8 sequence in half.
std::string truncate_utf8(std::string_view s, std::size_t max_chars);

/// RFC 3986 percent-encoding; unreserved characters pass through.
std::string percent_encode(std::string_view s);

/// application/x-www-form-urlencoded value encoding (space becomes '+').
std::string form_encode(std::string_view s);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace litpipe::text
