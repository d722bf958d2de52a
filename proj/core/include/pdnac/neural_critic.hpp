#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

class TrajectoryCursor;

enum class Activation { identity, sigmoid, elu, gelu };

Activation parse_activation(std::string_view text);
std::string_view to_string(Activation act) noexcept;

double activate(Activation act, double x) noexcept;
double activate_derivative(Activation act, double x) noexcept;

/// L-layer critic Q(phi; zeta) = m^{-1/2} b^T x_L with
/// x_l = m^{-1/2} sigma(W_l x_{l-1}), x_0 = phi.
///
/// The weights are not stored here: every evaluation takes the flattened
/// parameter vector zeta = (Vec(W_1); ...; Vec(W_L)), each Vec stacking
/// columns. The network keeps the fixed head b and the initialization zeta_0.
class CriticNet {
 public:
  CriticNet(int depth, int width, int input_dim, Activation activation, Eigen::VectorXd head,
            Eigen::VectorXd init_snapshot);

  int depth() const noexcept { return depth_; }
  int width() const noexcept { return width_; }
  int input_dim() const noexcept { return input_dim_; }
  Activation activation() const noexcept { return activation_; }
  /// m (n + (L - 1) m).
  Eigen::Index param_count() const noexcept { return init_.size(); }
  const Eigen::VectorXd& head() const noexcept { return head_; }
  const Eigen::VectorXd& init_snapshot() const noexcept { return init_; }

  /// Offset of Vec(W_layer) inside zeta, layer in [1, L].
  Eigen::Index layer_offset(int layer) const noexcept;

 private:
  int depth_;
  int width_;
  int input_dim_;
  Activation activation_;
  Eigen::VectorXd head_;
  Eigen::VectorXd init_;
};

/// W entries ~ N(0, 1), head entries uniform on {-1, +1}.
CriticNet init_network(int depth, int width, int input_dim, Activation activation, Rng& rng);

double forward(const CriticNet& net, const Eigen::VectorXd& zeta, const Eigen::VectorXd& phi);

/// Reverse-mode gradient of forward() with respect to zeta.
Eigen::VectorXd grad_params(const CriticNet& net, const Eigen::VectorXd& zeta,
                            const Eigen::VectorXd& phi);

/// Combined critic parameter xi = (eta, zeta), kept inside the ball
/// ||zeta - zeta_0|| <= radius by projection.
struct CriticParams {
  double eta = 0.0;
  Eigen::VectorXd zeta;
  double radius = 1.0;
};

/// Starting point (0, zeta_0).
CriticParams initial_params(const CriticNet& net, double radius);

/// Radial projection of the zeta block onto the ball around `anchor`; eta is untouched.
CriticParams project_ball(const CriticParams& params, const Eigen::VectorXd& anchor);

enum class FeatureMode { one_hot, random_projection };

FeatureMode parse_feature_mode(std::string_view text);
std::string_view to_string(FeatureMode mode) noexcept;

/// Fixed critic input phi(s, a) with ||phi|| <= 1.
class FeatureMap {
 public:
  FeatureMap(FeatureMode mode, int n_actions, Eigen::MatrixXd table);

  FeatureMode mode() const noexcept { return mode_; }
  int dim() const noexcept { return static_cast<int>(table_.cols()); }
  int n_actions() const noexcept { return n_actions_; }
  /// (S*A) x n, row s*A + a.
  const Eigen::MatrixXd& table() const noexcept { return table_; }
  Eigen::VectorXd operator()(int s, int a) const {
    return table_.row(static_cast<Eigen::Index>(s) * n_actions_ + a).transpose();
  }

 private:
  FeatureMode mode_;
  int n_actions_;
  Eigen::MatrixXd table_;
};

/// one_hot: unit indicator of the pair, zero-padded to n (n >= S*A required).
/// random_projection: Gaussian rows normalized to unit length.
FeatureMap build_feature_map(const CmdpModel& model, FeatureMode mode, int n, Rng& rng);

/// A critic network bound to its feature map, with Q(phi(s,a); zeta_0) and
/// grad_zeta Q(phi(s,a); zeta_0) cached for every pair.
class BoundCritic {
 public:
  BoundCritic(CriticNet net, FeatureMap features);

  const CriticNet& net() const noexcept { return net_; }
  const FeatureMap& features() const noexcept { return features_; }
  int n_pairs() const noexcept { return static_cast<int>(init_values_.size()); }
  int pair(int s, int a) const noexcept { return s * n_actions_ + a; }

  double value(const Eigen::VectorXd& zeta, int s, int a) const;
  /// Q(phi(s,a); zeta) for all pairs, pair-indexed.
  Eigen::VectorXd values(const Eigen::VectorXd& zeta) const;

  /// Column `pair` is grad_zeta Q(phi(s,a); zeta_0).
  const Eigen::MatrixXd& init_grads() const noexcept { return init_grads_; }
  const Eigen::VectorXd& init_values() const noexcept { return init_values_; }

  /// Q(phi; zeta_0) + <grad Q(phi; zeta_0), zeta - zeta_0> for all pairs.
  Eigen::VectorXd linearized_values(const Eigen::VectorXd& zeta) const;

  /// Oracle input for linearized_critic_system().
  CriticLinearization linearization() const;

  /// zeta += init_grads() * coeffs, using the rank-one layer structure of
  /// every column instead of the dense (p x S*A) matrix.
  void add_grad_combination(Eigen::VectorXd& zeta, const Eigen::VectorXd& coeffs) const;

 private:
  CriticNet net_;
  FeatureMap features_;
  int n_actions_;
  Eigen::MatrixXd init_grads_;
  Eigen::VectorXd init_values_;
  // Per layer at zeta_0, one column per pair: layer input x_{l-1} and dQ/d(pre-activation).
  std::vector<Eigen::MatrixXd> layer_inputs_;
  std::vector<Eigen::MatrixXd> layer_deltas_;
};

/// Single-transition critic semi-gradient, length 1 + p:
///
///     [ c_gamma (eta - g(s,a)) ;  delta * grad_zeta Q(phi(s,a); zeta_0) ]
///     delta = Q(phi(s,a); zeta) + eta - g(s,a) - Q(phi(s',a'); zeta)
///
/// Values use the current zeta, the gradient stays anchored at zeta_0.
/// Throws InvalidArgument when the transition has no a_next.
Eigen::VectorXd critic_semi_gradient(const BoundCritic& critic, const CriticParams& params,
                                     const Transition& z, Signal g, double c_gamma);

struct CriticLoopSettings {
  int inner_iterations = 1;  ///< H
  double step_size = 0.1;    ///< gamma_xi
  double c_gamma = 1.0;
  std::int64_t t_max = 2;
  double radius = 1.0;       ///< R
};

struct CriticTask {
  const BoundCritic* critic = nullptr;
  Signal signal = Signal::reward;
  CriticParams start;  ///< usually initial_params(net, R)
};

/// Projected MLMC semi-gradient descent on the critic, all tasks sharing each
/// rolled-out segment:
///
///     xi <- Proj_R(xi - gamma_xi * mlmc_combine(critic_semi_gradient, batch))
///
/// Returns xi_H per task, in task order.
std::vector<CriticParams> critic_inner_loop(std::span<const CriticTask> tasks,
                                            const CmdpModel& model, const SoftmaxPolicy& policy,
                                            const CriticLoopSettings& settings,
                                            TrajectoryCursor& cursor);

/// Single-signal convenience, starting from (0, zeta_0).
CriticParams critic_inner_loop(const BoundCritic& critic, Signal g, const CmdpModel& model,
                               const SoftmaxPolicy& policy, const CriticLoopSettings& settings,
                               TrajectoryCursor& cursor);

/// sum_{s,a} nu(s,a) (Q(phi(s,a); zeta) - target(s,a))^2.
double weighted_critic_mse(const BoundCritic& critic, const Eigen::VectorXd& zeta,
                           const Eigen::MatrixXd& nu, const Eigen::MatrixXd& target);

/// Checkpoint: JSON object {depth, width, input_dim, activation, head, init, zeta}.
/// Doubles round-trip exactly.
std::string dump_checkpoint(const CriticNet& net, const Eigen::VectorXd& zeta);
std::pair<CriticNet, Eigen::VectorXd> parse_checkpoint(std::string_view text);
void save_checkpoint(const CriticNet& net, const Eigen::VectorXd& zeta,
                     const std::filesystem::path& path);
std::pair<CriticNet, Eigen::VectorXd> load_checkpoint(const std::filesystem::path& path);

}  // namespace pdnac
