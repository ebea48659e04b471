#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace mobforge {

// Parses the TOML subset used by run configs and synth specs into a JSON tree:
// comments, [table] and [[array-of-tables]] headers with dotted keys, bare and
// quoted keys, dotted key assignment, basic and literal strings, integers,
// floats, booleans, (multi-line) arrays and inline tables.
// Throws Error(ConfigError) with the offending line.
nlohmann::json parse_toml(std::string_view text);

// Reads a config document; "*.json" files are parsed as JSON, everything else
// as TOML.
nlohmann::json read_config_document(const std::string& path);

}  // namespace mobforge
