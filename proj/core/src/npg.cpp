#include "pdnac/npg.hpp"

#include <memory>

#include <fmt/format.h>

#include "pdnac/errors.hpp"
#include "pdnac/sampler.hpp"

namespace pdnac {

double advantage_td(const BoundCritic& critic, const CriticParams& params, const Transition& z,
                    double g_val) {
  const int a_next = z.require_a_next();
  return g_val - params.eta + critic.value(params.zeta, z.s_next, a_next) -
         critic.value(params.zeta, z.s, z.a);
}

Eigen::VectorXd npg_grad_sample(const SoftmaxPolicy& policy, const Eigen::VectorXd& omega,
                                const Transition& z, double advantage) {
  if (omega.size() != policy.dim()) {
    throw InvalidArgument(
        fmt::format("omega has dimension {}, policy has {}", omega.size(), policy.dim()));
  }
  const Eigen::VectorXd score = policy.score(z.s, z.a);
  return (score.dot(omega) - advantage) * score;
}

Eigen::VectorXd npg_grad_sample(const SoftmaxPolicy& policy, const Eigen::VectorXd& omega,
                                const BoundCritic& critic, const CriticParams& params,
                                const Transition& z, Signal g) {
  return npg_grad_sample(policy, omega, z, advantage_td(critic, params, z, z.value(g)));
}

AdvantageMode parse_advantage_mode(std::string_view text) {
  if (text == "td_q") return AdvantageMode::td_q;
  if (text == "td_v") return AdvantageMode::td_v;
  throw InvalidArgument(fmt::format("unknown advantage mode '{}' (td_q | td_v)", text));
}

std::string_view to_string(AdvantageMode mode) noexcept {
  return mode == AdvantageMode::td_q ? "td_q" : "td_v";
}

AdvantageFn critic_advantage(const BoundCritic& critic, const CriticParams& params,
                             const SoftmaxPolicy& policy, Signal g, AdvantageMode mode) {
  const int S = policy.n_states();
  const int A = policy.n_actions();
  if (critic.n_pairs() != S * A) {
    throw InvalidArgument("critic and policy disagree on the number of state-action pairs");
  }
  const Eigen::VectorXd q = critic.values(params.zeta);
  const double eta = params.eta;
  if (mode == AdvantageMode::td_q) {
    return [q, eta, g, A](const Transition& z) {
      const int a_next = z.require_a_next();
      return z.value(g) - eta + q(z.s_next * A + a_next) - q(z.s * A + z.a);
    };
  }
  Eigen::VectorXd v(S);
  for (int s = 0; s < S; ++s) v(s) = policy.action_probs(s).dot(q.segment(s * A, A));
  return [v, eta, g](const Transition& z) { return z.value(g) - eta + v(z.s_next) - v(z.s); };
}

AdvantageFn table_advantage(Eigen::MatrixXd table) {
  return [table = std::move(table)](const Transition& z) { return table(z.s, z.a); };
}

std::vector<Eigen::VectorXd> npg_inner_loop(std::span<const AdvantageFn> advantages,
                                            const CmdpModel& model, const SoftmaxPolicy& policy,
                                            const NpgLoopSettings& settings,
                                            TrajectoryCursor& cursor) {
  if (settings.inner_iterations < 0) throw InvalidArgument("H must be >= 0");
  if (!(settings.step_size > 0.0)) throw InvalidArgument("gamma_omega must be positive");

  std::vector<Eigen::VectorXd> omegas(advantages.size(), Eigen::VectorXd::Zero(policy.dim()));
  for (int h = 0; h < settings.inner_iterations; ++h) {
    const MlmcBatch batch = draw_batch(cursor, model, policy, settings.t_max);
    for (std::size_t i = 0; i < advantages.size(); ++i) {
      const AdvantageFn& advantage = advantages[i];
      const Eigen::VectorXd& omega = omegas[i];
      const Statistic stat = [&](const Transition& z) {
        return npg_grad_sample(policy, omega, z, advantage(z));
      };
      omegas[i] = omega - settings.step_size * mlmc_combine(stat, batch);
    }
  }
  return omegas;
}

Eigen::VectorXd npg_inner_loop(const AdvantageFn& advantage, const CmdpModel& model,
                               const SoftmaxPolicy& policy, const NpgLoopSettings& settings,
                               TrajectoryCursor& cursor) {
  return npg_inner_loop(std::span<const AdvantageFn>(&advantage, 1), model, policy, settings,
                        cursor)
      .front();
}

}  // namespace pdnac
