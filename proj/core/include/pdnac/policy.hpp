#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "pdnac/rng.hpp"

namespace pdnac {

enum class PolicyKind { tabular_softmax, linear_softmax };

std::string_view to_string(PolicyKind kind) noexcept;
PolicyKind parse_policy_kind(std::string_view text);

/// Linear-softmax policy pi_theta(a|s) proportional to exp(theta^T psi(s, a)).
///
/// The feature table has one row per (s, a) pair, indexed s * A + a. The
/// tabular parameterization is the one-hot special case with d = S * A.
/// Value type: updating theta produces a new policy via with_theta().
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(int n_states, int n_actions, Eigen::MatrixXd features, PolicyKind kind,
                Eigen::VectorXd theta);

  /// One-hot features, theta = 0.
  static SoftmaxPolicy tabular(int n_states, int n_actions);

  /// Gaussian random features with every row rescaled to unit norm, theta = 0.
  static SoftmaxPolicy random_linear(int n_states, int n_actions, int dim, Rng& rng);

  SoftmaxPolicy with_theta(Eigen::VectorXd theta) const;

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  int dim() const noexcept { return static_cast<int>(theta_.size()); }
  PolicyKind kind() const noexcept { return kind_; }
  const Eigen::VectorXd& theta() const noexcept { return theta_; }
  const Eigen::MatrixXd& features() const noexcept { return features_; }
  /// Largest ||psi(s, a)||; scores are bounded by twice this.
  double max_feature_norm() const noexcept { return max_feature_norm_; }

  /// Softmax over actions with max-subtraction.
  Eigen::VectorXd action_probs(int s) const;

  /// S x A table of action probabilities.
  Eigen::MatrixXd prob_table() const;

  /// grad_theta log pi(a|s) = psi(s, a) - sum_b pi(b|s) psi(s, b).
  Eigen::VectorXd score(int s, int a) const;

  int sample(int s, Rng& rng) const;

 private:
  void check_ids(int s, int a) const;

  int n_states_;
  int n_actions_;
  Eigen::MatrixXd features_;
  PolicyKind kind_;
  Eigen::VectorXd theta_;
  double max_feature_norm_;
};

}  // namespace pdnac
