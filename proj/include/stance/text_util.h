#ifndef STANCE_TEXT_UTIL_H_
#define STANCE_TEXT_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stance {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::vector<std::string> split_whitespace(std::string_view s);

// Reads all lines, stripping a trailing '\r'. Throws ValidationError if the
// file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// 64-bit FNV-1a; stable across platforms, used for config and feature hashes.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Round-trippable decimal rendering of a double.
std::string format_double(double v);

}  // namespace stance

#endif  // STANCE_TEXT_UTIL_H_
