#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/rng.hpp"

namespace pdnac::acceptance::support {

Eigen::VectorXd random_normal(Eigen::Index n, Rng& rng);

/// Uniform direction with norm in [0, 1].
Eigen::VectorXd random_unit_ball(Eigen::Index n, Rng& rng);

/// max_i |fd_i - grad_i| / ||grad||_inf, central differences with h = 1e-6.
double gradcheck_error(const CriticNet& net, const Eigen::VectorXd& zeta,
                       const Eigen::VectorXd& phi);

/// Checks an evaluation against the model from scratch: stationarity, the
/// Poisson equation, the bias normalization and zero mean advantage.
/// Returns an empty string when every check holds within `tol`.
std::string evaluation_invariant_failure(const CmdpModel& model, const ExactEvaluation& eval,
                                         double tol);

/// Central differences of J_g in theta, h = 1e-5.
Eigen::VectorXd finite_difference_gradient(const CmdpModel& model, const SoftmaxPolicy& policy,
                                           Signal g);

CmdpModel one_state_model(const std::vector<double>& reward, const std::vector<double>& cost);

std::vector<std::vector<int>> all_deterministic_policies(int n_states, int n_actions);

/// Occupancy-weighted MSE after removing the weighted mean error.
double centered_critic_mse(const BoundCritic& critic, const Eigen::VectorXd& zeta,
                           const Eigen::MatrixXd& nu, const Eigen::MatrixXd& target);

/// First 4-state, 2-action, branching-2 uniform-cost garnet whose uniform
/// policy is infeasible and whose constraint is active at the optimum.
CmdpModel active_constraint_garnet();

/// Empty when `csv` has the exact metrics header and `rows` well-formed rows.
std::string csv_schema_failure(std::string_view csv, int rows);

}  // namespace pdnac::acceptance::support
