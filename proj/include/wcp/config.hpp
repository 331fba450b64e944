#pragma once

#include "wcp/graph.hpp"
#include "wcp/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace wcp {

/// Apply one key=value setting. Throws std::invalid_argument on unknown keys
/// or malformed values.
void apply_solver_setting(SolverConfig& config, std::string_view key, std::string_view value);
void apply_scenario_setting(ScenarioConfig& config, std::string_view key, std::string_view value);

/// Read '#'-commented key=value lines. Errors carry the line number.
SolverConfig read_solver_config(std::istream& in, SolverConfig base = {});
SolverConfig read_solver_config(const std::filesystem::path& path, SolverConfig base = {});
ScenarioConfig read_scenario_config(std::istream& in, ScenarioConfig base = {});
ScenarioConfig read_scenario_config(const std::filesystem::path& path, ScenarioConfig base = {});

void write_solver_config(const SolverConfig& config, std::ostream& out);
void write_scenario_config(const ScenarioConfig& config, std::ostream& out);

double parse_number(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

}  // namespace wcp
