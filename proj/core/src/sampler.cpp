#include "pdnac/sampler.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pdnac/errors.hpp"

namespace pdnac {

TrajectoryCursor::TrajectoryCursor(const CmdpModel& model, std::uint64_t seed)
    : n_states_(model.n_states()), state_(0), rng_(seed) {
  const Eigen::VectorXd& rho = model.initial_dist();
  state_ = sample_categorical({rho.data(), static_cast<std::size_t>(rho.size())}, rng_);
}

TrajectoryCursor::TrajectoryCursor(const CmdpModel& model, int start_state, std::uint64_t seed)
    : n_states_(model.n_states()), state_(start_state), rng_(seed) {
  model.check_state(start_state);
}

void TrajectoryCursor::advance(int next_state) {
  if (next_state < 0 || next_state >= n_states_) {
    throw InvalidArgument(fmt::format("cursor cannot move to state {}", next_state));
  }
  state_ = next_state;
  ++total_steps_;
}

int draw_level(Rng& rng) {
  // Count fair-coin flips up to and including the first head.
  int p = 1;
  while (uniform01(rng) >= 0.5) ++p;
  return p;
}

std::int64_t batch_length(int level, std::int64_t t_max) {
  if (level < 1) throw InvalidArgument("MLMC level must be >= 1");
  if (level >= 62) return 1;
  const std::int64_t n = std::int64_t{1} << level;
  return n <= t_max ? n : 1;
}

std::vector<Transition> rollout(TrajectoryCursor& cursor, const CmdpModel& model,
                                const SoftmaxPolicy& policy, std::int64_t length) {
  if (length < 0) throw InvalidArgument("rollout length must be >= 0");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(length));
  for (std::int64_t t = 0; t < length; ++t) {
    const int s = cursor.state();
    const int a = policy.sample(s, cursor.rng());
    out.push_back(step(model, policy, s, a, cursor.rng()));
    cursor.advance(out.back().s_next);
  }
  return out;
}

MlmcBatch draw_batch(TrajectoryCursor& cursor, const CmdpModel& model,
                     const SoftmaxPolicy& policy, std::int64_t t_max) {
  if (t_max < 1) throw InvalidArgument("T_max must be >= 1");
  MlmcBatch batch;
  batch.level_p = draw_level(cursor.rng());
  batch.length = batch_length(batch.level_p, t_max);
  batch.truncated = batch.length == 1;
  batch.transitions = rollout(cursor, model, policy, batch.length);
  return batch;
}

namespace {

void check_batch(const MlmcBatch& batch) {
  const auto n = static_cast<std::int64_t>(batch.transitions.size());
  const std::int64_t expected = batch.truncated ? 1 : (std::int64_t{1} << batch.level_p);
  if (n != expected || batch.length != expected) {
    throw InvalidArgument(fmt::format("malformed MLMC batch: level {}, length {}, {} transitions",
                                      batch.level_p, batch.length, n));
  }
}

}  // namespace

std::vector<double> mlmc_weights(const MlmcBatch& batch) {
  check_batch(batch);
  if (batch.truncated) return {1.0};
  const std::size_t n = batch.transitions.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) w[t] = t < n / 2 ? -1.0 : 1.0;
  w[0] += 1.0;
  return w;
}

Eigen::VectorXd mlmc_combine(const Statistic& stat, const MlmcBatch& batch) {
  check_batch(batch);
  const std::vector<Transition>& z = batch.transitions;
  Eigen::VectorXd v0 = stat(z.front());
  if (batch.truncated) return v0;

  // v^0 + 2^p (v^p - v^{p-1}) = v^0 + (sum of second half - sum of first half).
  // Both halves are accumulated in the same order, so a constant statistic
  // cancels to the last bit.
  const std::size_t half = z.size() / 2;
  Eigen::VectorXd low = v0;
  Eigen::VectorXd high = Eigen::VectorXd::Zero(v0.size());
  for (std::size_t t = 1; t < z.size(); ++t) {
    Eigen::VectorXd value = stat(z[t]);
    if (value.size() != v0.size()) {
      throw InvalidArgument(fmt::format(
          "MLMC statistic changed dimension from {} to {} at transition {}", v0.size(),
          value.size(), t));
    }
    if (t < half) {
      low += value;
    } else if (t == half) {
      high = value;
    } else {
      high += value;
    }
  }
  return v0 + (high - low);
}

MlmcIdentityCheck mlmc_mean_identity_check(const Statistic& stat, const CmdpModel& model,
                                           const SoftmaxPolicy& policy, std::int64_t t_max,
                                           std::int64_t n_trials, std::uint64_t seed) {
  if (n_trials < 2) throw InvalidArgument("identity check needs at least two trials");
  if (t_max < 1) throw InvalidArgument("T_max must be >= 1");
  int top_level = 0;
  while ((std::int64_t{1} << (top_level + 1)) <= t_max) ++top_level;
  const std::int64_t fixed_length = std::int64_t{1} << top_level;

  // Welford accumulators: a constant statistic gives its exact value and zero spread.
  struct Running {
    Eigen::VectorXd mean, m2;
    std::int64_t count = 0;
    void add(const Eigen::VectorXd& x) {
      if (count == 0) {
        mean = x;
        m2 = Eigen::VectorXd::Zero(x.size());
        count = 1;
        return;
      }
      ++count;
      const Eigen::VectorXd delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta.cwiseProduct(x - mean);
    }
    Eigen::VectorXd std_err() const {
      const double n = static_cast<double>(count);
      return (m2.cwiseMax(0.0) / (n - 1.0) / n).cwiseSqrt();
    }
  };

  Running mlmc, fixed_level;
  double total_length = 0.0;
  for (std::int64_t trial = 0; trial < n_trials; ++trial) {
    const auto trial_seed = derive_seed(seed, static_cast<std::uint64_t>(trial));
    TrajectoryCursor mlmc_cursor(model, derive_seed(trial_seed, "mlmc"));
    TrajectoryCursor fixed_cursor(model, derive_seed(trial_seed, "fixed"));

    const MlmcBatch batch = draw_batch(mlmc_cursor, model, policy, t_max);
    total_length += static_cast<double>(batch.length);
    mlmc.add(mlmc_combine(stat, batch));

    const std::vector<Transition> path = rollout(fixed_cursor, model, policy, fixed_length);
    Running path_mean;
    for (const Transition& z : path) path_mean.add(stat(z));
    fixed_level.add(path_mean.mean);
  }

  MlmcIdentityCheck out;
  out.mlmc_mean = mlmc.mean;
  out.fixed_level_mean = fixed_level.mean;
  out.mlmc_std_err = mlmc.std_err();
  out.fixed_level_std_err = fixed_level.std_err();
  out.std_err = (out.mlmc_std_err.cwiseAbs2() + out.fixed_level_std_err.cwiseAbs2()).cwiseSqrt();
  out.mean_batch_length = total_length / static_cast<double>(n_trials);
  return out;
}

}  // namespace pdnac
