#pragma once

// JSON scenario files. Unknown fields are rejected so that a typo can never
// silently fall back to a default.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "segauc/core.hpp"

namespace segauc {

/// Parses a scenario document. Throws Error(ParseError) on malformed input;
/// does not check scenario invariants (see validate_scenario).
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& s);

Scenario parse_scenario(const std::string& text);
std::string serialize_scenario(const Scenario& s);

Scenario load_scenario(const std::filesystem::path& path);

}  // namespace segauc
