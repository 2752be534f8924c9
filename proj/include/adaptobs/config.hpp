#pragma once

// Flat, typed key-value configuration files with one section per module.
//
//   # comment            (also ';'; a '#' after a value starts an inline comment)
//   [section]
//   key = value
//
// Value types: number, integer, bool (true/false), word, interval ("lo, hi") and number list
// ("a, b, c"; an empty value is the empty list). `[experiment] model` is required and selects
// the plant; every key not given keeps the builtin default for that model. Unknown keys,
// duplicates and malformed values raise ConfigError with the field ("section.key") and line.

#include "adaptobs/experiments.hpp"

#include <string>

namespace adaptobs {

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every field, doubles in shortest round-trip form, so parse_config(serialize_config(c))
// reproduces c exactly.
std::string serialize_config(const ExperimentConfig& cfg);

// Builtin example name or path to a config file.
ExperimentConfig resolve_config(const std::string& name_or_path);

}  // namespace adaptobs
