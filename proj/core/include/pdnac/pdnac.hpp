#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/npg.hpp"
#include "pdnac/policy.hpp"

namespace pdnac {

/// Run configuration. config_for_horizon() fills the schedule from the single
/// knob T; any field can then be overridden.
///
/// Unset optional step sizes are derived at run time:
///   gamma_xi    = min(8 log T / (lambda_hat H), gamma_xi_cap)
///   gamma_omega = min(2 log T / (mu_hat H), gamma_omega_cap)
///   R           = c_R log T
/// with mu_hat defaulting to the smallest positive eigenvalue of the exact
/// Fisher matrix at theta_0.
struct PdnacConfig {
  std::int64_t T = 256;
  int K = 16;
  int H = 16;
  std::int64_t t_max = 256;
  double alpha = 0.25;
  double beta = 0.25;

  std::optional<double> gamma_xi;
  std::optional<double> gamma_omega;
  double lambda_hat = 0.1;
  std::optional<double> mu_hat;
  double gamma_xi_cap = 30.0;
  double gamma_omega_cap = 0.1;

  std::optional<double> radius;
  double c_R = 1.0;
  double c_gamma = 0.001;
  double delta = 0.1;

  int depth = 2;
  int width = 512;
  Activation activation = Activation::gelu;
  FeatureMode feature_mode = FeatureMode::one_hot;
  int feature_dim = 0;  ///< 0: S*A

  PolicyKind policy_kind = PolicyKind::tabular_softmax;
  int policy_dim = 0;  ///< linear policies only

  AdvantageMode advantage_mode = AdvantageMode::td_v;

  /// Start each epoch's critic from the previous epoch's xi instead of (0, zeta_0).
  bool warm_start = false;

  std::uint64_t seed = 0;
  bool timing = false;  ///< fill wall_ms; off keeps output byte-deterministic
};

/// K = H = ceil(sqrt T), alpha = beta = T^{-1/4}, T_max = T.
PdnacConfig config_for_horizon(std::int64_t T);

/// Throws InvariantViolation naming the first broken field constraint.
void validate(const PdnacConfig& config);

/// Sets one field from its textual value. Keys are the names listed by
/// config_keys(). Throws InvalidArgument for unknown keys or bad values.
void set_config_field(PdnacConfig& config, std::string_view key, std::string_view value);

/// Every key accepted by set_config_field(), in a fixed order.
const std::vector<std::string>& config_keys();

/// Textual value of one field ("" for an unset optional).
std::string get_config_field(const PdnacConfig& config, std::string_view key);

/// Step sizes and radius after derivation.
struct ResolvedSchedule {
  double gamma_xi = 0.0;
  double gamma_omega = 0.0;
  double radius = 0.0;
  double mu_hat = 0.0;
};

struct EpochRow {
  int k = 0;
  double J_r = 0.0;
  double J_c = 0.0;
  double lambda = 0.0;  ///< lambda_{k+1}, after this epoch's dual step
  double gap = 0.0;
  double violation = 0.0;  ///< -J_c
  double eta_r = 0.0;
  double eta_c = 0.0;
  double critic_mse_r = 0.0;
  double critic_mse_c = 0.0;
  double npg_err_r = 0.0;
  double npg_err_c = 0.0;
  double wall_ms = 0.0;
};

struct RunMetrics {
  std::vector<EpochRow> rows;
  PdnacConfig config;
  ResolvedSchedule schedule;
  double J_r_star = 0.0;  ///< NaN when the constrained problem is infeasible
  std::int64_t total_env_steps = 0;
  std::int64_t inner_iterations = 0;  ///< critic + NPG iterations that drew a batch
  double max_radius_used = 0.0;       ///< max over epochs and signals of ||zeta - zeta_0||
  std::vector<std::string> warnings;

  double mean_gap() const;
  double mean_violation() const;
};

/// lambda - beta * eta_c clamped to [0, 2 / delta].
double dual_update(double lambda, double beta, double eta_c, double delta);

/// theta + alpha (omega_r + lambda omega_c).
Eigen::VectorXd primal_update(const Eigen::VectorXd& theta, double alpha,
                              const Eigen::VectorXd& omega_r, const Eigen::VectorXd& omega_c,
                              double lambda);

/// Builds the policy family named by the config (theta = 0).
SoftmaxPolicy initial_policy(const PdnacConfig& config, const CmdpModel& model);

/// Full primal-dual actor-critic run, metrics scored against the exact oracle.
RunMetrics run(const PdnacConfig& config, const CmdpModel& model);

}  // namespace pdnac
