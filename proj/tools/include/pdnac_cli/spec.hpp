#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdnac/cmdp.hpp"
#include "pdnac/pdnac.hpp"

namespace pdnac::cli {

struct GarnetSpec {
  int n_states = 4;
  int n_actions = 2;
  int branching = 2;
  ConstraintMode constraint = ConstraintMode::slater;
  std::optional<std::uint64_t> seed;  ///< unset: derive_seed(root, "env")
  double slater_margin = 0.1;
};

/// Experiment description, read from YAML:
///
///     env: garnet              # or {n_states, n_actions, branching, constraint, seed,
///                              #     slater_margin} or {file: path}
///     T: [256, 1024]
///     seeds: 5
///     seed: 0
///     out: results
///     jobs: 1
///     overrides: {m: 128, c_gamma: 0.01}
struct ExperimentSpec {
  std::optional<std::filesystem::path> env_file;
  GarnetSpec garnet;
  std::vector<std::int64_t> T = {256};
  int seeds = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out = "pdnac_out";
  int jobs = 1;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// Throws ParseError with a line number for malformed YAML, unknown keys and
/// type mismatches (naming the field), InvariantViolation for T < 4 or seeds < 1.
ExperimentSpec parse_spec(std::string_view text);
ExperimentSpec load_spec(const std::filesystem::path& path);

void validate(const ExperimentSpec& spec);

/// The environment of the experiment: the env file, else a garnet.
CmdpModel build_env(const ExperimentSpec& spec);

/// config_for_horizon(T), then overrides, then the run seed.
PdnacConfig make_config(const ExperimentSpec& spec, std::int64_t T, std::uint64_t run_seed);

}  // namespace pdnac::cli
