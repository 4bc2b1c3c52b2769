#pragma once

#include <string>

#include <json.hpp>

namespace schoolmerge {

// Parses .json as-is; .toml through a small built-in reader covering the
// subset used by experiment specs: [table] headers, key = value pairs with
// strings, integers, floats, booleans, arrays and inline tables, and #
// comments. Anything else is a validation error.
nlohmann::json load_config(const std::string& path);

nlohmann::json parse_toml(const std::string& text);

}  // namespace schoolmerge
