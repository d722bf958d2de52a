#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/rng.hpp"

namespace pdnac {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The two per-step signals of a constrained MDP.
enum class Signal { reward, cost };

std::string_view to_string(Signal g) noexcept;

inline constexpr Signal kSignals[] = {Signal::reward, Signal::cost};

/// Tabular constrained MDP (S, A, r, c, P, rho).
///
/// Immutable after construction. The constructor validates every invariant and
/// throws InvariantViolation naming the first one that fails:
///   - each transition row is a probability vector (sum 1 within 1e-12, entries >= 0)
///   - reward in [0, 1], cost in [-1, 1]
///   - initial distribution is a probability vector
class CmdpModel {
 public:
  static constexpr double kSimplexTol = 1e-12;

  /// `transition` is flattened row-major as [s][a][s'].
  CmdpModel(int n_states, int n_actions, std::vector<double> transition,
            Eigen::MatrixXd reward, Eigen::MatrixXd cost, Eigen::VectorXd initial_dist);

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  int n_pairs() const noexcept { return n_states_ * n_actions_; }

  /// Row index of (s, a) in pair-indexed tables.
  int pair(int s, int a) const noexcept { return s * n_actions_ + a; }

  double transition(int s, int a, int s_next) const {
    return kernel_(pair(s, a), s_next);
  }
  std::span<const double> transition_row(int s, int a) const {
    return {kernel_.data() + static_cast<std::ptrdiff_t>(pair(s, a)) * n_states_,
            static_cast<std::size_t>(n_states_)};
  }
  /// P as an (S*A) x S row-stochastic matrix.
  const RowMatrix& kernel() const noexcept { return kernel_; }

  const Eigen::MatrixXd& reward() const noexcept { return reward_; }
  const Eigen::MatrixXd& cost() const noexcept { return cost_; }
  const Eigen::MatrixXd& signal(Signal g) const noexcept {
    return g == Signal::reward ? reward_ : cost_;
  }
  const Eigen::VectorXd& initial_dist() const noexcept { return initial_dist_; }

  /// Flattened [s][a][s'] copy, the serialization layout.
  std::vector<double> flat_transition() const;

  void check_state(int s) const;
  void check_action(int a) const;

  bool operator==(const CmdpModel& other) const;

 private:
  int n_states_;
  int n_actions_;
  RowMatrix kernel_;
  Eigen::MatrixXd reward_;
  Eigen::MatrixXd cost_;
  Eigen::VectorXd initial_dist_;
};

/// One observed step z = (s, a, s') with the bootstrap action a' ~ pi(.|s').
struct Transition {
  int s = 0;
  int a = 0;
  int s_next = 0;
  std::optional<int> a_next;
  double r_val = 0.0;
  double c_val = 0.0;

  double value(Signal g) const noexcept { return g == Signal::reward ? r_val : c_val; }
  /// Throws InvalidArgument when a_next was never sampled.
  int require_a_next() const;

  bool operator==(const Transition&) const = default;
};

class SoftmaxPolicy;

/// Samples s' ~ P(.|s, a) and fills r/c from the tables. a_next is left empty.
Transition step(const CmdpModel& model, int s, int a, Rng& rng);

/// As above, then draws a_next ~ pi(.|s') from the same generator.
Transition step(const CmdpModel& model, const SoftmaxPolicy& policy, int s, int a, Rng& rng);

enum class ConstraintMode {
  uniform,  ///< cost ~ U[-1, 1]
  slater,   ///< U[-1, 1] shifted so a strictly feasible policy exists
};

ConstraintMode parse_constraint_mode(std::string_view text);
std::string_view to_string(ConstraintMode mode) noexcept;

/// Weight of the uniform row blended into every garnet transition row.
inline constexpr double kGarnetBlend = 1e-3;

/// Random "garnet" CMDP.
///
/// Each (s, a) row puts Dirichlet(1, ..., 1) mass on `branching` distinct next
/// states and is then blended with the uniform row at weight kGarnetBlend, so
/// every policy induces an irreducible aperiodic chain. Rewards are U[0, 1].
/// In slater mode the costs are shifted so that, in every state, the best
/// action has cost >= slater_margin; the policy picking it has J_c >= margin.
/// The initial distribution is uniform.
CmdpModel garnet(int n_states, int n_actions, int branching, ConstraintMode mode,
                 std::uint64_t seed, double slater_margin = 0.1);

}  // namespace pdnac
