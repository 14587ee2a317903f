#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace traitlab {

// Shortest decimal form that parses back to the identical double
// ("0.06" -> 0.06, 0.0 -> "0"). Used for every number we persist,
// so golden files round-trip byte-identically.
std::string format_double(double value);

// Strict parse of a full token; throws ParseError on trailing garbage.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

// FNV-1a, the pinned content hash for checksums and provenance ids.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(std::string_view text);
std::string to_hex(std::uint64_t value);

}  // namespace traitlab
