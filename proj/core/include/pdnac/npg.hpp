#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/policy.hpp"

namespace pdnac {

class TrajectoryCursor;

struct NpgState {
  Eigen::VectorXd omega;
  int h = 0;
  double gamma_omega = 0.1;
};

/// Neural TD residual g(s,a) - eta + Q(phi(s',a'); zeta) - Q(phi(s,a); zeta).
/// Throws InvalidArgument when the transition has no a_next.
double advantage_td(const BoundCritic& critic, const CriticParams& params, const Transition& z,
                    double g_val);

/// score (score^T omega) - advantage * score, score = score(policy, s, a).
Eigen::VectorXd npg_grad_sample(const SoftmaxPolicy& policy, const Eigen::VectorXd& omega,
                                const Transition& z, double advantage);

/// As above with advantage = advantage_td(critic, params, z, z.value(g)).
Eigen::VectorXd npg_grad_sample(const SoftmaxPolicy& policy, const Eigen::VectorXd& omega,
                                const BoundCritic& critic, const CriticParams& params,
                                const Transition& z, Signal g);

/// Per-transition advantage estimate fed to the NPG loop.
using AdvantageFn = std::function<double(const Transition&)>;

enum class AdvantageMode {
  td_q,  ///< advantage_td on the critic's Q values
  td_v,  ///< g - eta + V(s') - V(s) with V(s) = sum_a pi(a|s) Q(phi(s,a); zeta)
};

AdvantageMode parse_advantage_mode(std::string_view text);
std::string_view to_string(AdvantageMode mode) noexcept;

/// Advantage source backed by a trained critic. Q is tabulated once at
/// construction, so later changes to `params` are not seen.
AdvantageFn critic_advantage(const BoundCritic& critic, const CriticParams& params,
                             const SoftmaxPolicy& policy, Signal g, AdvantageMode mode);

/// Advantage source from an S x A table (oracle injection).
AdvantageFn table_advantage(Eigen::MatrixXd table);

struct NpgLoopSettings {
  int inner_iterations = 1;  ///< H
  double step_size = 0.1;    ///< gamma_omega
  std::int64_t t_max = 2;
};

/// MLMC stochastic gradient descent on f(omega) = omega^T F omega / 2 - omega^T grad J
/// from omega_0 = 0, all advantage sources sharing each rolled-out segment.
/// Returns omega_H per source, in order.
std::vector<Eigen::VectorXd> npg_inner_loop(std::span<const AdvantageFn> advantages,
                                            const CmdpModel& model, const SoftmaxPolicy& policy,
                                            const NpgLoopSettings& settings,
                                            TrajectoryCursor& cursor);

Eigen::VectorXd npg_inner_loop(const AdvantageFn& advantage, const CmdpModel& model,
                               const SoftmaxPolicy& policy, const NpgLoopSettings& settings,
                               TrajectoryCursor& cursor);

}  // namespace pdnac
