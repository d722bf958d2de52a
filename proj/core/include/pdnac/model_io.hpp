#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pdnac/cmdp.hpp"

namespace pdnac {

/// Plain-text model format (YAML), shared with the CLI's --env-file:
///
///     n_states: 2
///     n_actions: 2
///     transition: [...]   # S*A*S entries, row-major [s][a][s']
///     reward: [...]       # S*A entries, row-major [s][a]
///     cost: [...]
///     initial_dist: [...]
///
/// Doubles are written with 17 significant digits so a dump/parse cycle is exact.
std::string dump_model(const CmdpModel& model);

/// Throws ParseError (with line number) on malformed text or unknown keys, and
/// InvariantViolation when the parsed model breaks a CmdpModel invariant.
CmdpModel parse_model(std::string_view text);

CmdpModel load_model(const std::filesystem::path& path);
void save_model(const CmdpModel& model, const std::filesystem::path& path);

}  // namespace pdnac
