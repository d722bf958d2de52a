#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "pdnac/cmdp.hpp"
#include "pdnac/pdnac.hpp"

namespace pdnac {

inline constexpr std::string_view kMetricsHeader =
    "k,J_r,J_c,lambda,gap,violation,eta_r,eta_c,critic_mse_r,critic_mse_c,npg_err_r,npg_err_c,"
    "wall_ms";

/// Header plus one line per epoch. Doubles use the shortest round-trip form.
std::string metrics_csv(const RunMetrics& metrics);

/// JSON object of every config field, keyed as in config_keys(); unset optionals are null.
std::string config_json(const PdnacConfig& config);

/// FNV-1a of config_json().
std::uint64_t config_hash(const PdnacConfig& config);

/// {config, config_hash, seed, schedule, mean_gap, mean_violation, total_env_steps, ...}
std::string summary_json(const RunMetrics& metrics);

/// Exact solution of the model under the uniform policy plus the constrained
/// and unconstrained optima.
std::string oracle_json(const CmdpModel& model);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace pdnac
