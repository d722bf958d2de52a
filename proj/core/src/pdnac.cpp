#include "pdnac/pdnac.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "pdnac/errors.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/rng.hpp"
#include "pdnac/sampler.hpp"

namespace pdnac {

PdnacConfig config_for_horizon(std::int64_t T) {
  if (T < 4) throw InvalidArgument(fmt::format("T must be >= 4, got {}", T));
  PdnacConfig config;
  config.T = T;
  const auto root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(T)) - 1e-9));
  config.K = root;
  config.H = root;
  config.t_max = T;
  config.alpha = std::pow(static_cast<double>(T), -0.25);
  config.beta = config.alpha;
  return config;
}

namespace {

void require(bool ok, std::string_view what) {
  if (!ok) throw InvariantViolation(fmt::format("config: {}", what));
}

bool positive(const std::optional<double>& v) { return !v || *v > 0.0; }

}  // namespace

void validate(const PdnacConfig& c) {
  require(c.T >= 4, "T >= 4");
  require(c.K >= 1, "K >= 1");
  require(c.H >= 1, "H >= 1");
  require(c.t_max >= 2, "T_max >= 2");
  require(c.alpha > 0.0, "alpha > 0");
  require(c.beta >= 0.0, "beta >= 0");
  require(positive(c.gamma_xi), "gamma_xi > 0");
  require(positive(c.gamma_omega), "gamma_omega > 0");
  require(c.lambda_hat > 0.0, "lambda_hat > 0");
  require(positive(c.mu_hat), "mu_hat > 0");
  require(c.gamma_xi_cap > 0.0, "gamma_xi_cap > 0");
  require(c.gamma_omega_cap > 0.0, "gamma_omega_cap > 0");
  require(positive(c.radius), "R > 0");
  require(c.c_R > 0.0, "c_R > 0");
  require(c.c_gamma > 0.0, "c_gamma > 0");
  require(c.delta > 0.0 && c.delta < 1.0, "delta in (0, 1)");
  require(c.depth >= 1, "L >= 1");
  require(c.width >= 1, "m >= 1");
  require(c.feature_dim >= 0, "feature_dim >= 0");
  require(c.policy_kind == PolicyKind::tabular_softmax || c.policy_dim >= 1,
          "policy_dim >= 1 for linear policies");
}

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw InvalidArgument(fmt::format("field '{}': cannot parse '{}' as a number", key, text));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidArgument(fmt::format("field '{}': expected true or false, got '{}'", key, text));
}

std::optional<double> parse_optional(std::string_view key, std::string_view text) {
  if (text.empty() || text == "auto") return std::nullopt;
  return parse_number<double>(key, text);
}

std::string format_optional(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

struct Field {
  std::function<void(PdnacConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const PdnacConfig&)> get;
};

template <class T>
Field number_field(T PdnacConfig::*member) {
  return {[member](PdnacConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const PdnacConfig& c) { return fmt::format("{}", c.*member); }};
}

Field optional_field(std::optional<double> PdnacConfig::*member) {
  return {[member](PdnacConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_optional(k, v);
          },
          [member](const PdnacConfig& c) { return format_optional(c.*member); }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"T", number_field(&PdnacConfig::T)},
      {"K", number_field(&PdnacConfig::K)},
      {"H", number_field(&PdnacConfig::H)},
      {"T_max", number_field(&PdnacConfig::t_max)},
      {"alpha", number_field(&PdnacConfig::alpha)},
      {"beta", number_field(&PdnacConfig::beta)},
      {"gamma_xi", optional_field(&PdnacConfig::gamma_xi)},
      {"gamma_omega", optional_field(&PdnacConfig::gamma_omega)},
      {"lambda_hat", number_field(&PdnacConfig::lambda_hat)},
      {"mu_hat", optional_field(&PdnacConfig::mu_hat)},
      {"gamma_xi_cap", number_field(&PdnacConfig::gamma_xi_cap)},
      {"gamma_omega_cap", number_field(&PdnacConfig::gamma_omega_cap)},
      {"R", optional_field(&PdnacConfig::radius)},
      {"c_R", number_field(&PdnacConfig::c_R)},
      {"c_gamma", number_field(&PdnacConfig::c_gamma)},
      {"delta", number_field(&PdnacConfig::delta)},
      {"L", number_field(&PdnacConfig::depth)},
      {"m", number_field(&PdnacConfig::width)},
      {"activation",
       {[](PdnacConfig& c, std::string_view, std::string_view v) {
          c.activation = parse_activation(v);
        },
        [](const PdnacConfig& c) { return std::string(to_string(c.activation)); }}},
      {"features",
       {[](PdnacConfig& c, std::string_view, std::string_view v) {
          c.feature_mode = parse_feature_mode(v);
        },
        [](const PdnacConfig& c) { return std::string(to_string(c.feature_mode)); }}},
      {"feature_dim", number_field(&PdnacConfig::feature_dim)},
      {"policy",
       {[](PdnacConfig& c, std::string_view, std::string_view v) {
          c.policy_kind = parse_policy_kind(v);
        },
        [](const PdnacConfig& c) { return std::string(to_string(c.policy_kind)); }}},
      {"policy_dim", number_field(&PdnacConfig::policy_dim)},
      {"advantage",
       {[](PdnacConfig& c, std::string_view, std::string_view v) {
          c.advantage_mode = parse_advantage_mode(v);
        },
        [](const PdnacConfig& c) { return std::string(to_string(c.advantage_mode)); }}},
      {"seed", number_field(&PdnacConfig::seed)},
      {"warm_start",
       {[](PdnacConfig& c, std::string_view k, std::string_view v) { c.warm_start = parse_bool(k, v); },
        [](const PdnacConfig& c) { return std::string(c.warm_start ? "true" : "false"); }}},
      {"timing",
       {[](PdnacConfig& c, std::string_view k, std::string_view v) { c.timing = parse_bool(k, v); },
        [](const PdnacConfig& c) { return std::string(c.timing ? "true" : "false"); }}},
  };
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& [name, field] : field_table()) {
    if (name == key) return field;
  }
  throw InvalidArgument(fmt::format("unknown config key '{}'", key));
}

}  // namespace

void set_config_field(PdnacConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, key, value);
}

std::string get_config_field(const PdnacConfig& config, std::string_view key) {
  return find_field(key).get(config);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& entry : field_table()) out.push_back(entry.first);
    return out;
  }();
  return keys;
}

double RunMetrics::mean_gap() const {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const EpochRow& row : rows) sum += row.gap;
  return sum / static_cast<double>(rows.size());
}

double RunMetrics::mean_violation() const {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const EpochRow& row : rows) sum += row.violation;
  return sum / static_cast<double>(rows.size());
}

double dual_update(double lambda, double beta, double eta_c, double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  return std::clamp(lambda - beta * eta_c, 0.0, 2.0 / delta);
}

Eigen::VectorXd primal_update(const Eigen::VectorXd& theta, double alpha,
                              const Eigen::VectorXd& omega_r, const Eigen::VectorXd& omega_c,
                              double lambda) {
  if (omega_r.size() != theta.size() || omega_c.size() != theta.size()) {
    throw InvalidArgument(fmt::format("primal update: theta has dimension {}, omega_r {}, omega_c {}",
                                      theta.size(), omega_r.size(), omega_c.size()));
  }
  return theta + alpha * (omega_r + lambda * omega_c);
}

SoftmaxPolicy initial_policy(const PdnacConfig& config, const CmdpModel& model) {
  if (config.policy_kind == PolicyKind::tabular_softmax) {
    return SoftmaxPolicy::tabular(model.n_states(), model.n_actions());
  }
  Rng rng(derive_seed(config.seed, "policy-features"));
  return SoftmaxPolicy::random_linear(model.n_states(), model.n_actions(), config.policy_dim, rng);
}

namespace {

double npg_error(const Eigen::MatrixXd& fisher, const Eigen::VectorXd& grad,
                 const Eigen::VectorXd& omega) {
  try {
    return (omega - pseudo_solve(fisher, grad)).norm();
  } catch (const RangeError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

RunMetrics run(const PdnacConfig& config, const CmdpModel& model) {
  validate(config);
  RunMetrics metrics;
  metrics.config = config;

  const double log_T = std::log(static_cast<double>(config.T));
  SoftmaxPolicy policy = initial_policy(config, model);

  ResolvedSchedule& schedule = metrics.schedule;
  schedule.radius = config.radius.value_or(config.c_R * log_T);
  if (config.mu_hat) {
    schedule.mu_hat = *config.mu_hat;
  } else {
    schedule.mu_hat = min_positive_eigenvalue(exact_fisher(model, policy));
    if (!(schedule.mu_hat > 0.0)) schedule.mu_hat = 0.1;
  }
  schedule.gamma_xi = config.gamma_xi.value_or(
      std::min(8.0 * log_T / (config.lambda_hat * config.H), config.gamma_xi_cap));
  schedule.gamma_omega = config.gamma_omega.value_or(
      std::min(2.0 * log_T / (schedule.mu_hat * config.H), config.gamma_omega_cap));

  Rng net_rng(derive_seed(config.seed, "net"));
  Rng feature_rng(derive_seed(config.seed, "features"));
  const int feature_dim = config.feature_dim > 0 ? config.feature_dim : model.n_pairs();
  const BoundCritic critic(
      init_network(config.depth, config.width, feature_dim, config.activation, net_rng),
      build_feature_map(model, config.feature_mode, feature_dim, feature_rng));
  TrajectoryCursor cursor(model, derive_seed(config.seed, "trajectory"));

  double J_r_star = std::numeric_limits<double>::quiet_NaN();
  try {
    J_r_star = solve_constrained_optimum(model).J_r_star;
  } catch (const InfeasibleError& e) {
    metrics.warnings.push_back(fmt::format("constrained optimum unavailable, gap is NaN: {}", e.what()));
  }
  metrics.J_r_star = J_r_star;

  const CriticLoopSettings critic_settings{config.H, schedule.gamma_xi, config.c_gamma,
                                           config.t_max, schedule.radius};
  const NpgLoopSettings npg_settings{config.H, schedule.gamma_omega, config.t_max};
  const Eigen::VectorXd& zeta0 = critic.net().init_snapshot();

  const CriticParams fresh = initial_params(critic.net(), schedule.radius);
  std::array<CriticParams, 2> critic_start = {fresh, fresh};

  double lambda = 0.0;
  Eigen::VectorXd theta = policy.theta();
  for (int k = 0; k < config.K; ++k) {
    const auto start = std::chrono::steady_clock::now();
    policy = policy.with_theta(theta);

    const CriticTask tasks[] = {{&critic, Signal::reward, critic_start[0]},
                                {&critic, Signal::cost, critic_start[1]}};
    const std::vector<CriticParams> xi =
        critic_inner_loop(tasks, model, policy, critic_settings, cursor);
    if (config.warm_start) critic_start = {xi[0], xi[1]};

    const AdvantageFn advantages[] = {
        critic_advantage(critic, xi[0], policy, Signal::reward, config.advantage_mode),
        critic_advantage(critic, xi[1], policy, Signal::cost, config.advantage_mode)};
    const std::vector<Eigen::VectorXd> omega =
        npg_inner_loop(advantages, model, policy, npg_settings, cursor);
    metrics.inner_iterations += 2 * static_cast<std::int64_t>(config.H);

    const Eigen::VectorXd next_theta = primal_update(theta, config.alpha, omega[0], omega[1], lambda);
    const double next_lambda = dual_update(lambda, config.beta, xi[1].eta, config.delta);

    const auto stop = std::chrono::steady_clock::now();

    const ExactEvaluation eval = evaluate_exact(model, policy);
    const Eigen::MatrixXd fisher = exact_fisher(eval, policy);
    EpochRow row;
    row.k = k;
    row.J_r = eval.reward.J;
    row.J_c = eval.cost.J;
    row.lambda = next_lambda;
    row.gap = J_r_star - eval.reward.J;
    row.violation = -eval.cost.J;
    row.eta_r = xi[0].eta;
    row.eta_c = xi[1].eta;
    row.critic_mse_r = weighted_critic_mse(critic, xi[0].zeta, eval.nu_pi, eval.reward.Q);
    row.critic_mse_c = weighted_critic_mse(critic, xi[1].zeta, eval.nu_pi, eval.cost.Q);
    row.npg_err_r = npg_error(fisher, exact_policy_gradient(eval, policy, Signal::reward), omega[0]);
    row.npg_err_c = npg_error(fisher, exact_policy_gradient(eval, policy, Signal::cost), omega[1]);
    row.wall_ms = config.timing
                      ? std::chrono::duration<double, std::milli>(stop - start).count()
                      : 0.0;
    metrics.rows.push_back(row);
    for (const CriticParams& p : xi) {
      metrics.max_radius_used = std::max(metrics.max_radius_used, (p.zeta - zeta0).norm());
    }

    theta = next_theta;
    lambda = next_lambda;
  }
  metrics.total_env_steps = cursor.total_steps();
  return metrics;
}

}  // namespace pdnac
