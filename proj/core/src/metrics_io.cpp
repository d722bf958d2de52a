#include "pdnac/metrics_io.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "pdnac/errors.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

using nlohmann::json;

std::string metrics_csv(const RunMetrics& metrics) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const EpochRow& r : metrics.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.k, r.J_r, r.J_c, r.lambda,
                       r.gap, r.violation, r.eta_r, r.eta_c, r.critic_mse_r, r.critic_mse_c,
                       r.npg_err_r, r.npg_err_c, r.wall_ms);
  }
  return out;
}

namespace {

json config_object(const PdnacConfig& config) {
  json j = json::object();
  for (const std::string& key : config_keys()) {
    const std::string value = get_config_field(config, key);
    j[key] = value.empty() ? json(nullptr) : json(value);
  }
  return j;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json signal_json(const SignalValues& values) {
  return {{"J", values.J},
          {"Q", matrix_json(values.Q)},
          {"V", vector_json(values.V)},
          {"advantage", matrix_json(values.advantage)}};
}

}  // namespace

std::string config_json(const PdnacConfig& config) { return config_object(config).dump(); }

std::uint64_t config_hash(const PdnacConfig& config) { return fnv1a(config_json(config)); }

std::string summary_json(const RunMetrics& metrics) {
  json j;
  j["config"] = config_object(metrics.config);
  j["config_hash"] = fmt::format("{:016x}", config_hash(metrics.config));
  j["seed"] = metrics.config.seed;
  j["schedule"] = {{"gamma_xi", metrics.schedule.gamma_xi},
                   {"gamma_omega", metrics.schedule.gamma_omega},
                   {"R", metrics.schedule.radius},
                   {"mu_hat", metrics.schedule.mu_hat}};
  j["J_r_star"] = number_or_null(metrics.J_r_star);
  j["mean_gap"] = number_or_null(metrics.mean_gap());
  j["mean_violation"] = number_or_null(metrics.mean_violation());
  j["total_env_steps"] = metrics.total_env_steps;
  j["warnings"] = metrics.warnings;
  return j.dump(2) + "\n";
}

std::string oracle_json(const CmdpModel& model) {
  const SoftmaxPolicy uniform = SoftmaxPolicy::tabular(model.n_states(), model.n_actions());
  const ExactEvaluation eval = evaluate_exact(model, uniform);
  json j;
  j["policy"] = "uniform";
  j["d_pi"] = vector_json(eval.d_pi);
  j["nu_pi"] = matrix_json(eval.nu_pi);
  j["reward"] = signal_json(eval.reward);
  j["cost"] = signal_json(eval.cost);
  try {
    j["mixing_time"] = mixing_time(model, uniform);
  } catch (const MixingCapExceeded&) {
    j["mixing_time"] = nullptr;
  }
  try {
    const ConstrainedOptimum opt = solve_constrained_optimum(model);
    j["constrained_optimum"] = {{"J_r_star", opt.J_r_star},
                                {"J_c", opt.J_c},
                                {"nu_star", matrix_json(opt.nu_star)},
                                {"policy", matrix_json(opt.policy)}};
  } catch (const InfeasibleError& e) {
    j["constrained_optimum"] = {{"infeasible", e.what()}};
  }
  const UnconstrainedOptimum best = solve_unconstrained_optimum(model, Signal::reward);
  j["unconstrained_optimum"] = {{"J_star", best.J_star}, {"actions", best.actions}};
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw InvalidArgument(fmt::format("write to '{}' failed", path.string()));
}

}  // namespace pdnac
