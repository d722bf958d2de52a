#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/policy.hpp"

namespace pdnac {

/// P^pi(s, s') = sum_a pi(a|s) P(s'|s, a).
Eigen::MatrixXd induced_kernel(const CmdpModel& model, const SoftmaxPolicy& policy);

/// Throws ErgodicityError unless the chain has a single communicating class
/// covering every state and period 1. The message lists the closed classes or
/// the period.
void check_ergodic(const Eigen::MatrixXd& kernel);

/// Solves d P = d, sum d = 1 after the ergodicity check.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& kernel);
Eigen::VectorXd stationary_distribution(const CmdpModel& model, const SoftmaxPolicy& policy);

/// Average value, bias and advantage of one signal under a policy.
struct SignalValues {
  double J = 0.0;
  Eigen::MatrixXd Q;          ///< S x A
  Eigen::VectorXd V;          ///< S
  Eigen::MatrixXd advantage;  ///< S x A, Q - V
};

/// Exact evaluation of a policy.
///
/// The bias function is normalized by sum_s d(s) V(s) = 0, which is what the
/// series definition of Q yields for an ergodic chain.
struct ExactEvaluation {
  Eigen::VectorXd d_pi;    ///< stationary state distribution
  Eigen::MatrixXd nu_pi;   ///< S x A occupancy, d(s) pi(a|s)
  Eigen::MatrixXd pi;      ///< S x A action probabilities
  SignalValues reward;
  SignalValues cost;

  const SignalValues& operator[](Signal g) const noexcept {
    return g == Signal::reward ? reward : cost;
  }
};

ExactEvaluation evaluate_exact(const CmdpModel& model, const SoftmaxPolicy& policy);
/// Same, for an explicit S x A table of action probabilities.
ExactEvaluation evaluate_exact(const CmdpModel& model, const Eigen::MatrixXd& pi);

/// grad J_g = sum nu(s,a) A_g(s,a) score(s,a).
Eigen::VectorXd exact_policy_gradient(const CmdpModel& model, const SoftmaxPolicy& policy,
                                      Signal g);
Eigen::VectorXd exact_policy_gradient(const ExactEvaluation& eval, const SoftmaxPolicy& policy,
                                      Signal g);

/// F = sum nu(s,a) score(s,a) score(s,a)^T.
Eigen::MatrixXd exact_fisher(const CmdpModel& model, const SoftmaxPolicy& policy);
Eigen::MatrixXd exact_fisher(const ExactEvaluation& eval, const SoftmaxPolicy& policy);

/// Smallest eigenvalue of F above the pseudo-inverse cutoff (1e-10 * lambda_max).
double min_positive_eigenvalue(const Eigen::MatrixXd& symmetric);

/// Minimum-norm solution of F w = grad via an eigendecomposition with cutoff
/// 1e-10 * lambda_max. Throws RangeError when ||F w - grad|| > 1e-8.
Eigen::VectorXd pseudo_solve(const Eigen::MatrixXd& fisher, const Eigen::VectorXd& grad);

Eigen::VectorXd exact_npg(const CmdpModel& model, const SoftmaxPolicy& policy, Signal g);

struct ConstrainedOptimum {
  double J_r_star = 0.0;
  double J_c = 0.0;           ///< cost of the optimal occupancy
  Eigen::MatrixXd nu_star;    ///< S x A occupancy measure
  Eigen::MatrixXd policy;     ///< S x A, nu normalized per state
};

/// Occupancy-measure LP: max sum nu r subject to flow conservation,
/// sum nu = 1, nu >= 0 and sum nu c >= 0. Throws InfeasibleError naming the
/// violated constraint.
ConstrainedOptimum solve_constrained_optimum(const CmdpModel& model);

struct UnconstrainedOptimum {
  double J_star = 0.0;
  std::vector<int> actions;  ///< deterministic greedy action per state
};

/// Average-reward policy iteration over deterministic policies, maximizing J_g.
UnconstrainedOptimum solve_unconstrained_optimum(const CmdpModel& model,
                                                 Signal g = Signal::reward);

/// Average value of a deterministic policy (one action per state).
double deterministic_policy_value(const CmdpModel& model, const std::vector<int>& actions,
                                  Signal g);

inline constexpr std::int64_t kMixingCap = 1'000'000;

/// max_s || P^t(s, .) - d ||_TV.
double tv_to_stationarity(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& d,
                          std::int64_t t);

/// Smallest t >= 1 whose worst-case TV distance to stationarity is <= 1/4.
/// Brackets t by repeated squaring, then bisects (the distance is nonincreasing
/// in t). Throws MixingCapExceeded past `cap`.
std::int64_t mixing_time(const Eigen::MatrixXd& kernel, std::int64_t cap = kMixingCap);
std::int64_t mixing_time(const CmdpModel& model, const SoftmaxPolicy& policy,
                         std::int64_t cap = kMixingCap);

/// Linearization of a critic network at its initialization: row (s*A + a) of
/// `grads` is grad_zeta Q(phi(s,a); zeta_0), `init_values` holds Q(phi(s,a); zeta_0).
struct CriticLinearization {
  Eigen::MatrixXd grads;        ///< (S*A) x p
  Eigen::VectorXd init_values;  ///< S*A
};

/// Expected linear TD system of the linearized critic.
///
/// Coordinates are xi = (eta, zeta - zeta_0). A and b are the exact
/// expectations of the single-transition matrix and vector under
/// (s,a) ~ nu, s' ~ P(.|s,a), a' ~ pi(.|s'):
///
///     A(z) = [ c_gamma     0                  ]    b(z) = [ c_gamma g(s,a)                  ]
///            [ psi         psi (psi - psi')^T ]           [ (g(s,a) - Q0 + Q0') psi         ]
///
/// so that A(z) xi - b(z) is the critic semi-gradient of the linearized network.
struct LinearizedCriticSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd xi_star;  ///< minimum-norm least-squares solution
  double c_gamma = 1.0;
};

LinearizedCriticSystem linearized_critic_system(const CmdpModel& model,
                                                const SoftmaxPolicy& policy, Signal g,
                                                const CriticLinearization& critic,
                                                double c_gamma);

/// M((s,a), (s',a')) = P(s'|s,a) pi(a'|s'): the pair-to-pair kernel.
Eigen::MatrixXd pair_kernel(const CmdpModel& model, const Eigen::MatrixXd& pi);

}  // namespace pdnac
