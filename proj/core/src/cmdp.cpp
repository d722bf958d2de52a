#include "pdnac/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <fmt/format.h>

#include "pdnac/errors.hpp"
#include "pdnac/policy.hpp"

namespace pdnac {

std::string_view to_string(Signal g) noexcept {
  return g == Signal::reward ? "r" : "c";
}

namespace {

void check_probability_vector(std::span<const double> p, const std::string& name) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      throw InvariantViolation(fmt::format("{} has negative entry {} at index {}", name, p[i], i));
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > CmdpModel::kSimplexTol) {
    throw InvariantViolation(
        fmt::format("{} sums to {:.17g} (expected 1 within 1e-12)", name, sum));
  }
}

}  // namespace

CmdpModel::CmdpModel(int n_states, int n_actions, std::vector<double> transition,
                     Eigen::MatrixXd reward, Eigen::MatrixXd cost, Eigen::VectorXd initial_dist)
    : n_states_(n_states),
      n_actions_(n_actions),
      reward_(std::move(reward)),
      cost_(std::move(cost)),
      initial_dist_(std::move(initial_dist)) {
  if (n_states_ < 1) throw InvariantViolation("n_states must be a positive integer");
  if (n_actions_ < 1) throw InvariantViolation("n_actions must be a positive integer");
  const auto sa = static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_);
  if (transition.size() != sa * static_cast<std::size_t>(n_states_)) {
    throw InvariantViolation(fmt::format("transition has {} entries, expected S*A*S = {}",
                                         transition.size(), sa * n_states_));
  }
  if (reward_.rows() != n_states_ || reward_.cols() != n_actions_) {
    throw InvariantViolation(fmt::format("reward must be {}x{}", n_states_, n_actions_));
  }
  if (cost_.rows() != n_states_ || cost_.cols() != n_actions_) {
    throw InvariantViolation(fmt::format("cost must be {}x{}", n_states_, n_actions_));
  }
  if (initial_dist_.size() != n_states_) {
    throw InvariantViolation(fmt::format("initial_dist must have {} entries", n_states_));
  }

  kernel_ = Eigen::Map<const RowMatrix>(transition.data(), static_cast<Eigen::Index>(sa),
                                        n_states_);
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      check_probability_vector(transition_row(s, a),
                               fmt::format("transition row (s={}, a={})", s, a));
      const double r = reward_(s, a);
      if (!(r >= 0.0 && r <= 1.0)) {
        throw InvariantViolation(fmt::format("reward({}, {}) = {} outside [0, 1]", s, a, r));
      }
      const double c = cost_(s, a);
      if (!(c >= -1.0 && c <= 1.0)) {
        throw InvariantViolation(fmt::format("cost({}, {}) = {} outside [-1, 1]", s, a, c));
      }
    }
  }
  check_probability_vector({initial_dist_.data(), static_cast<std::size_t>(n_states_)},
                           "initial_dist");
}

std::vector<double> CmdpModel::flat_transition() const {
  return {kernel_.data(), kernel_.data() + kernel_.size()};
}

void CmdpModel::check_state(int s) const {
  if (s < 0 || s >= n_states_) {
    throw InvalidArgument(fmt::format("state id {} out of range [0, {})", s, n_states_));
  }
}

void CmdpModel::check_action(int a) const {
  if (a < 0 || a >= n_actions_) {
    throw InvalidArgument(fmt::format("action id {} out of range [0, {})", a, n_actions_));
  }
}

bool CmdpModel::operator==(const CmdpModel& other) const {
  return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ &&
         kernel_ == other.kernel_ && reward_ == other.reward_ && cost_ == other.cost_ &&
         initial_dist_ == other.initial_dist_;
}

int Transition::require_a_next() const {
  if (!a_next) throw InvalidArgument("transition is missing its bootstrap action a_next");
  return *a_next;
}

Transition step(const CmdpModel& model, int s, int a, Rng& rng) {
  model.check_state(s);
  model.check_action(a);
  Transition z;
  z.s = s;
  z.a = a;
  z.s_next = sample_categorical(model.transition_row(s, a), rng);
  z.r_val = model.reward()(s, a);
  z.c_val = model.cost()(s, a);
  return z;
}

Transition step(const CmdpModel& model, const SoftmaxPolicy& policy, int s, int a, Rng& rng) {
  Transition z = step(model, s, a, rng);
  z.a_next = policy.sample(z.s_next, rng);
  return z;
}

ConstraintMode parse_constraint_mode(std::string_view text) {
  if (text == "uniform") return ConstraintMode::uniform;
  if (text == "slater") return ConstraintMode::slater;
  throw InvalidArgument(fmt::format("unknown constraint_mode '{}' (uniform | slater)", text));
}

std::string_view to_string(ConstraintMode mode) noexcept {
  return mode == ConstraintMode::uniform ? "uniform" : "slater";
}

CmdpModel garnet(int n_states, int n_actions, int branching, ConstraintMode mode,
                 std::uint64_t seed, double slater_margin) {
  if (n_states < 1 || n_actions < 1) {
    throw InvalidArgument("garnet needs n_states >= 1 and n_actions >= 1");
  }
  if (branching < 1 || branching > n_states) {
    throw InvalidArgument(
        fmt::format("branching {} out of range [1, n_states = {}]", branching, n_states));
  }
  if (!(slater_margin > 0.0 && slater_margin < 1.0)) {
    throw InvalidArgument("slater_margin must lie in (0, 1)");
  }

  Rng rng(seed);
  const int S = n_states;
  const int A = n_actions;
  std::vector<double> transition(static_cast<std::size_t>(S) * A * S, 0.0);
  std::vector<int> states(S);
  std::exponential_distribution<double> unit_exp(1.0);

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      std::iota(states.begin(), states.end(), 0);
      // Partial Fisher-Yates: the first `branching` entries are the support.
      for (int i = 0; i < branching; ++i) {
        const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(S - i));
        std::swap(states[i], states[j]);
      }
      std::vector<double> w(branching);
      double total = 0.0;
      for (double& x : w) {
        x = unit_exp(rng);
        total += x;
      }
      double* row = transition.data() + (static_cast<std::size_t>(s) * A + a) * S;
      for (int s2 = 0; s2 < S; ++s2) row[s2] = kGarnetBlend / S;
      for (int i = 0; i < branching; ++i) row[states[i]] += (1.0 - kGarnetBlend) * w[i] / total;
      // Renormalize so the row sum is 1 to machine precision.
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) sum += row[s2];
      for (int s2 = 0; s2 < S; ++s2) row[s2] /= sum;
    }
  }

  Eigen::MatrixXd reward(S, A);
  Eigen::MatrixXd cost(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      reward(s, a) = uniform01(rng);
      cost(s, a) = 2.0 * uniform01(rng) - 1.0;
    }
  }
  if (mode == ConstraintMode::slater) {
    const double worst_best = cost.rowwise().maxCoeff().minCoeff();
    cost = (cost.array() + (slater_margin - worst_best)).cwiseMax(-1.0).cwiseMin(1.0).matrix();
  }

  Eigen::VectorXd rho = Eigen::VectorXd::Constant(S, 1.0 / S);
  return CmdpModel(S, A, std::move(transition), std::move(reward), std::move(cost),
                   std::move(rho));
}

}  // namespace pdnac
