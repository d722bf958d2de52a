#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

/// The single persistent Markov chain of a run. Rollouts continue from the
/// state the previous one ended in; the chain is never reset.
class TrajectoryCursor {
 public:
  /// s_0 ~ initial_dist, drawn from a generator seeded with `seed`.
  TrajectoryCursor(const CmdpModel& model, std::uint64_t seed);
  /// Explicit start state.
  TrajectoryCursor(const CmdpModel& model, int start_state, std::uint64_t seed);

  int state() const noexcept { return state_; }
  std::int64_t total_steps() const noexcept { return total_steps_; }
  Rng& rng() noexcept { return rng_; }

  /// Moves to s', counting one environment step.
  void advance(int next_state);

 private:
  int n_states_;
  int state_;
  Rng rng_;
  std::int64_t total_steps_ = 0;
};

/// Level P ~ Geom(1/2) on {1, 2, ...} with pmf 2^-p.
int draw_level(Rng& rng);

/// 2^p when 2^p <= T_max, else 1.
std::int64_t batch_length(int level, std::int64_t t_max);

/// `length` consecutive transitions from the cursor's state. Each transition
/// carries a_next drawn fresh from pi(.|s'); the cursor ends at the last s'.
std::vector<Transition> rollout(TrajectoryCursor& cursor, const CmdpModel& model,
                                const SoftmaxPolicy& policy, std::int64_t length);

/// One geometric-level trajectory segment.
struct MlmcBatch {
  int level_p = 1;
  std::int64_t length = 1;
  bool truncated = false;
  std::vector<Transition> transitions;
};

/// Draws a level from the cursor's generator and rolls out the segment.
MlmcBatch draw_batch(TrajectoryCursor& cursor, const CmdpModel& model,
                     const SoftmaxPolicy& policy, std::int64_t t_max);

/// Per-transition weights w_t with mlmc_combine(stat) = sum_t w_t stat(z_t).
///
/// Untruncated: v^0 + 2^p (v^p - v^{p-1}) with v^j the mean of the first 2^j
/// statistics. Truncated: v^0, the first transition alone.
std::vector<double> mlmc_weights(const MlmcBatch& batch);

using Statistic = std::function<Eigen::VectorXd(const Transition&)>;

/// Telescoped MLMC estimate of E[stat]. Accumulates one transition at a time.
/// Throws InvalidArgument when stat changes output dimension across transitions.
Eigen::VectorXd mlmc_combine(const Statistic& stat, const MlmcBatch& batch);

struct MlmcIdentityCheck {
  Eigen::VectorXd mlmc_mean;
  Eigen::VectorXd fixed_level_mean;
  Eigen::VectorXd mlmc_std_err;
  Eigen::VectorXd fixed_level_std_err;
  /// sqrt(se_mlmc^2 + se_fixed^2), per coordinate.
  Eigen::VectorXd std_err;
  double mean_batch_length = 0.0;
};

/// Monte Carlo estimate of both sides of E[g^MLMC] = E[g^{floor(log2 T_max)}].
///
/// Every trial starts two independent cursors from s_0 ~ initial_dist: one
/// draws an MLMC batch, the other averages the first 2^{floor(log2 T_max)}
/// statistics of a fixed-length rollout.
MlmcIdentityCheck mlmc_mean_identity_check(const Statistic& stat, const CmdpModel& model,
                                           const SoftmaxPolicy& policy, std::int64_t t_max,
                                           std::int64_t n_trials, std::uint64_t seed);

}  // namespace pdnac
