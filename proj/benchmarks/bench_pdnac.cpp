#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/rng.hpp"
#include "pdnac/sampler.hpp"

namespace {

using namespace pdnac;

Eigen::VectorXd random_input(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd x(n);
  for (double& v : x) v = normal(rng);
  return x / x.norm();
}

void BM_Forward(benchmark::State& state) {
  Rng rng(1);
  const CriticNet net = init_network(2, static_cast<int>(state.range(0)), 10, Activation::gelu, rng);
  const Eigen::VectorXd phi = random_input(10, rng);
  const Eigen::VectorXd zeta = net.init_snapshot();
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, zeta, phi));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Arg(1024);

void BM_GradParams(benchmark::State& state) {
  Rng rng(2);
  const CriticNet net = init_network(2, static_cast<int>(state.range(0)), 10, Activation::gelu, rng);
  const Eigen::VectorXd phi = random_input(10, rng);
  const Eigen::VectorXd zeta = net.init_snapshot();
  for (auto _ : state) benchmark::DoNotOptimize(grad_params(net, zeta, phi));
}
BENCHMARK(BM_GradParams)->Arg(64)->Arg(256)->Arg(1024);

void BM_CriticIteration(benchmark::State& state) {
  const CmdpModel model = garnet(5, 2, 3, ConstraintMode::slater, 3);
  Rng rng(3);
  FeatureMap features = build_feature_map(model, FeatureMode::random_projection, 10, rng);
  const BoundCritic critic(init_network(2, static_cast<int>(state.range(0)), 10, Activation::gelu, rng),
                           std::move(features));
  const SoftmaxPolicy policy = SoftmaxPolicy::tabular(5, 2);
  TrajectoryCursor cursor(model, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        critic_inner_loop(critic, Signal::reward, model, policy, {1, 10.0, 0.01, 16, 1.0}, cursor));
  }
}
BENCHMARK(BM_CriticIteration)->Arg(64)->Arg(512);

void BM_EvaluateExact(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const CmdpModel model = garnet(S, 4, 3, ConstraintMode::slater, 5);
  const SoftmaxPolicy policy = SoftmaxPolicy::tabular(S, 4);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_exact(model, policy));
}
BENCHMARK(BM_EvaluateExact)->Arg(10)->Arg(50)->Arg(200);

void BM_ConstrainedOptimum(benchmark::State& state) {
  const int S = static_cast<int>(state.range(0));
  const CmdpModel model = garnet(S, 4, 3, ConstraintMode::slater, 6);
  for (auto _ : state) benchmark::DoNotOptimize(solve_constrained_optimum(model));
}
BENCHMARK(BM_ConstrainedOptimum)->Arg(10)->Arg(50);

}  // namespace
BENCHMARK_MAIN();
