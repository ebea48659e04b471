#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mobforge/geo.hpp"

namespace mobforge {

// Shortest representation that round-trips to the same double.
std::string format_double(double v);
// "lat,lon" with round-trip precision.
std::string format_coord(const GeoCoord& c);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with_icase(std::string_view s, std::string_view prefix);

// Hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace mobforge
