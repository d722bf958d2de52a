#include "pdnac/policy.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pdnac/errors.hpp"

namespace pdnac {

std::string_view to_string(PolicyKind kind) noexcept {
  return kind == PolicyKind::tabular_softmax ? "tabular" : "linear";
}

PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "tabular") return PolicyKind::tabular_softmax;
  if (text == "linear") return PolicyKind::linear_softmax;
  throw InvalidArgument(fmt::format("unknown policy kind '{}' (tabular | linear)", text));
}

SoftmaxPolicy::SoftmaxPolicy(int n_states, int n_actions, Eigen::MatrixXd features,
                             PolicyKind kind, Eigen::VectorXd theta)
    : n_states_(n_states),
      n_actions_(n_actions),
      features_(std::move(features)),
      kind_(kind),
      theta_(std::move(theta)) {
  if (n_states_ < 1 || n_actions_ < 1) throw InvalidArgument("policy needs S, A >= 1");
  if (features_.rows() != static_cast<Eigen::Index>(n_states_) * n_actions_) {
    throw InvalidArgument(fmt::format("policy feature table has {} rows, expected S*A = {}",
                                      features_.rows(), n_states_ * n_actions_));
  }
  if (features_.cols() != theta_.size()) {
    throw InvalidArgument(fmt::format("theta has dimension {}, features have {}",
                                      theta_.size(), features_.cols()));
  }
  max_feature_norm_ = features_.rowwise().norm().maxCoeff();
}

SoftmaxPolicy SoftmaxPolicy::tabular(int n_states, int n_actions) {
  const int d = n_states * n_actions;
  return SoftmaxPolicy(n_states, n_actions, Eigen::MatrixXd::Identity(d, d),
                       PolicyKind::tabular_softmax, Eigen::VectorXd::Zero(d));
}

SoftmaxPolicy SoftmaxPolicy::random_linear(int n_states, int n_actions, int dim, Rng& rng) {
  if (dim < 1) throw InvalidArgument("policy feature dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd psi(n_states * n_actions, dim);
  for (Eigen::Index i = 0; i < psi.rows(); ++i) {
    for (Eigen::Index j = 0; j < psi.cols(); ++j) psi(i, j) = normal(rng);
    psi.row(i).normalize();
  }
  return SoftmaxPolicy(n_states, n_actions, std::move(psi), PolicyKind::linear_softmax,
                       Eigen::VectorXd::Zero(dim));
}

SoftmaxPolicy SoftmaxPolicy::with_theta(Eigen::VectorXd theta) const {
  if (theta.size() != theta_.size()) {
    throw InvalidArgument(fmt::format("theta dimension {} != {}", theta.size(), theta_.size()));
  }
  SoftmaxPolicy next = *this;
  next.theta_ = std::move(theta);
  return next;
}

void SoftmaxPolicy::check_ids(int s, int a) const {
  if (s < 0 || s >= n_states_) {
    throw InvalidArgument(fmt::format("state id {} out of range [0, {})", s, n_states_));
  }
  if (a < 0 || a >= n_actions_) {
    throw InvalidArgument(fmt::format("action id {} out of range [0, {})", a, n_actions_));
  }
}

Eigen::VectorXd SoftmaxPolicy::action_probs(int s) const {
  check_ids(s, 0);
  Eigen::VectorXd logits = features_.middleRows(static_cast<Eigen::Index>(s) * n_actions_,
                                                n_actions_) * theta_;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd p = logits.array().exp();
  return p / p.sum();
}

Eigen::MatrixXd SoftmaxPolicy::prob_table() const {
  Eigen::MatrixXd table(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s) table.row(s) = action_probs(s).transpose();
  return table;
}

Eigen::VectorXd SoftmaxPolicy::score(int s, int a) const {
  check_ids(s, a);
  const Eigen::VectorXd p = action_probs(s);
  const auto block = features_.middleRows(static_cast<Eigen::Index>(s) * n_actions_, n_actions_);
  return features_.row(static_cast<Eigen::Index>(s) * n_actions_ + a).transpose() -
         block.transpose() * p;
}

int SoftmaxPolicy::sample(int s, Rng& rng) const {
  const Eigen::VectorXd p = action_probs(s);
  return sample_categorical({p.data(), static_cast<std::size_t>(p.size())}, rng);
}

}  // namespace pdnac
