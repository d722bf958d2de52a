#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pdnac/cmdp.hpp"
#include "pdnac/errors.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/sampler.hpp"

namespace pdnac {
namespace {

CriticNet fixed_net(int width, int input_dim, Eigen::VectorXd weights, Activation act = Activation::identity) {
  return CriticNet(1, width, input_dim, act, Eigen::VectorXd::Ones(width), std::move(weights));
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

TEST(Forward, ScalarChain) {
  const CriticNet net = fixed_net(1, 1, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(forward(net, net.init_snapshot(), Eigen::VectorXd::Constant(1, 0.5)), 1.0);
}

TEST(Forward, TwoUnitWidth) {
  const CriticNet net = fixed_net(2, 1, Eigen::Vector2d(1.0, 1.0));
  EXPECT_NEAR(forward(net, net.init_snapshot(), Eigen::VectorXd::Ones(1)), 1.0, 1e-15);
}

TEST(Forward, ZeroInputGivesZeroForEluAndGelu) {
  Rng rng(1);
  for (Activation act : {Activation::elu, Activation::gelu}) {
    const CriticNet net = init_network(3, 8, 4, act, rng);
    EXPECT_DOUBLE_EQ(forward(net, net.init_snapshot(), Eigen::VectorXd::Zero(4)), 0.0);
  }
}

TEST(Forward, DimensionMismatchThrows) {
  Rng rng(2);
  const CriticNet net = init_network(2, 4, 3, Activation::gelu, rng);
  EXPECT_THROW(forward(net, net.init_snapshot(), Eigen::VectorXd::Zero(2)), InvalidArgument);
  EXPECT_THROW(forward(net, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST(GradParams, ScalarChain) {
  const CriticNet net = fixed_net(1, 1, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(grad_params(net, net.init_snapshot(), Eigen::VectorXd::Constant(1, 0.5))(0), 0.5);
}

TEST(GradParams, ColumnStackedLayout) {
  // L = 1, identity: dQ/dW(i, j) = b_i phi_j / m, stored at j * m + i.
  Rng rng(3);
  const CriticNet net = init_network(1, 3, 2, Activation::identity, rng);
  const Eigen::Vector2d phi(0.3, -0.7);
  const Eigen::VectorXd grad = grad_params(net, net.init_snapshot(), phi);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(grad(j * 3 + i), net.head()(i) * phi(j) / 3.0, 1e-15);
  }
}

TEST(GradParams, MatchesFiniteDifferences) {
  Rng rng(4);
  for (Activation act : {Activation::identity, Activation::sigmoid, Activation::elu, Activation::gelu}) {
    for (int trial = 0; trial < 10; ++trial) {
      const CriticNet net = init_network(1 + trial % 3, 2 + trial, 3, act, rng);
      const Eigen::VectorXd phi = random_vector(3, rng).normalized();
      const Eigen::VectorXd zeta = net.init_snapshot() + 0.2 * random_vector(net.param_count(), rng);
      const Eigen::VectorXd grad = grad_params(net, zeta, phi);
      Eigen::VectorXd probe = zeta;
      for (Eigen::Index i = 0; i < zeta.size(); ++i) {
        probe(i) += 1e-6;
        const double up = forward(net, probe, phi);
        probe(i) -= 2e-6;
        const double down = forward(net, probe, phi);
        probe(i) = zeta(i);
        EXPECT_NEAR((up - down) / 2e-6, grad(i), 1e-5 * std::max(1.0, grad.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST(GradParams, SmoothnessShrinksWithWidth) {
  // max over probes of |grad(zeta1) - grad(zeta0)| / |zeta1 - zeta0| decreases as m grows.
  std::vector<double> worst;
  for (int m : {16, 64, 256}) {
    Rng rng(5);
    double w = 0.0;
    for (int probe = 0; probe < 5; ++probe) {
      const CriticNet net = init_network(2, m, 4, Activation::gelu, rng);
      const Eigen::VectorXd phi = random_vector(4, rng).normalized();
      const Eigen::VectorXd step = random_vector(net.param_count(), rng).normalized();
      const Eigen::VectorXd g0 = grad_params(net, net.init_snapshot(), phi);
      const Eigen::VectorXd g1 = grad_params(net, net.init_snapshot() + step, phi);
      w = std::max(w, (g1 - g0).norm());
    }
    worst.push_back(w);
  }
  EXPECT_GT(worst[0], worst[1]);
  EXPECT_GT(worst[1], worst[2]);
}

TEST(InitNetwork, MomentsAndHead) {
  Rng rng(6);
  const CriticNet net = init_network(1, 10'000, 1, Activation::gelu, rng);
  const Eigen::VectorXd& w = net.init_snapshot();
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(10'000.0));
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / 10'000.0));
  EXPECT_TRUE((net.head().array().abs() == 1.0).all());
  EXPECT_EQ(net.param_count(), 10'000);
}

TEST(InitNetwork, DeterministicUnderSeed) {
  Rng a(7), b(7);
  const CriticNet x = init_network(2, 8, 3, Activation::elu, a);
  const CriticNet y = init_network(2, 8, 3, Activation::elu, b);
  EXPECT_EQ(x.init_snapshot(), y.init_snapshot());
  EXPECT_EQ(x.head(), y.head());
  EXPECT_EQ(x.param_count(), 8 * (3 + 8));
}

TEST(InitNetwork, RejectsBadHead) {
  EXPECT_THROW(CriticNet(1, 1, 1, Activation::identity, Eigen::VectorXd::Constant(1, 0.5),
                         Eigen::VectorXd::Ones(1)),
               InvariantViolation);
}

TEST(ProjectBall, InteriorAndExterior) {
  const Eigen::Vector3d anchor(1, 2, 3);
  const Eigen::Vector3d dir = Eigen::Vector3d(1, -2, 2) / 3.0;
  CriticParams inside{7.3, anchor + 0.5 * dir, 1.0};
  EXPECT_EQ(project_ball(inside, anchor).zeta, inside.zeta);
  CriticParams outside{7.3, anchor + 2.0 * dir, 1.0};
  const CriticParams projected = project_ball(outside, anchor);
  EXPECT_NEAR((projected.zeta - anchor).norm(), 1.0, 1e-15);
  EXPECT_TRUE((projected.zeta - anchor).isApprox(dir, 1e-15));
  EXPECT_DOUBLE_EQ(projected.eta, 7.3);
}

TEST(ProjectBall, IdempotentAndNonexpansive) {
  Rng rng(8);
  const Eigen::VectorXd anchor = random_vector(5, rng);
  for (int i = 0; i < 1000; ++i) {
    const CriticParams x{0.0, anchor + 2.0 * random_vector(5, rng), 1.5};
    const CriticParams y{0.0, anchor + 2.0 * random_vector(5, rng), 1.5};
    const CriticParams px = project_ball(x, anchor);
    const CriticParams py = project_ball(y, anchor);
    EXPECT_LE((px.zeta - py.zeta).norm(), (x.zeta - y.zeta).norm() + 1e-12);
    EXPECT_LE((project_ball(px, anchor).zeta - px.zeta).norm(), 1e-12);
  }
}

TEST(FeatureMap, OneHotIsOrthonormal) {
  const CmdpModel model = garnet(3, 2, 2, ConstraintMode::uniform, 1);
  Rng rng(9);
  const FeatureMap map = build_feature_map(model, FeatureMode::one_hot, 6, rng);
  const Eigen::MatrixXd gram = map.table() * map.table().transpose();
  EXPECT_TRUE(gram.isApprox(Eigen::MatrixXd::Identity(6, 6)));
  EXPECT_THROW(build_feature_map(model, FeatureMode::one_hot, 5, rng), InvalidArgument);
}

TEST(FeatureMap, RandomProjectionBoundedAndDeterministic) {
  const CmdpModel model = garnet(4, 3, 2, ConstraintMode::uniform, 2);
  Rng a(10), b(10);
  const FeatureMap x = build_feature_map(model, FeatureMode::random_projection, 5, a);
  const FeatureMap y = build_feature_map(model, FeatureMode::random_projection, 5, b);
  EXPECT_EQ(x.table(), y.table());
  EXPECT_LE(x.table().rowwise().norm().maxCoeff(), 1.0 + 1e-12);
  EXPECT_EQ(parse_feature_mode("random-projection"), FeatureMode::random_projection);
  EXPECT_THROW(parse_feature_mode("fourier"), InvalidArgument);
}

struct CriticFixture {
  CmdpModel model = garnet(3, 2, 2, ConstraintMode::uniform, 4);
  SoftmaxPolicy policy = SoftmaxPolicy::tabular(3, 2);
  BoundCritic critic;

  explicit CriticFixture(int depth, Activation act, int width = 8)
      : critic([&] {
          Rng rng(11);
          CriticNet net = init_network(depth, width, 6, act, rng);
          return BoundCritic(std::move(net), build_feature_map(model, FeatureMode::one_hot, 6, rng));
        }()) {}
};

TEST(SemiGradient, VanishesAtFixedPoint) {
  // Zero head contribution: the identity net with zero weights outputs 0 everywhere.
  const CriticNet net(1, 2, 1, Activation::identity, Eigen::Vector2d(1, -1), Eigen::Vector2d::Zero());
  Eigen::MatrixXd r(1, 1), c(1, 1);
  r << 0.4;
  c << 0.0;
  const CmdpModel model(1, 1, {1.0}, r, c, Eigen::VectorXd::Ones(1));
  Rng rng(1);
  const BoundCritic critic(net, build_feature_map(model, FeatureMode::one_hot, 1, rng));
  Transition z;
  z.a_next = 0;
  z.r_val = 0.4;
  const CriticParams params{0.4, net.init_snapshot(), 1.0};
  EXPECT_LE(critic_semi_gradient(critic, params, z, Signal::reward, 1.0).norm(), 1e-15);
}

TEST(SemiGradient, EtaCoordinate) {
  CriticFixture f(2, Activation::gelu);
  Transition z;
  z.a_next = 1;
  z.r_val = 0.2;
  const CriticParams params{0.7, f.critic.net().init_snapshot(), 1.0};
  EXPECT_NEAR(critic_semi_gradient(f.critic, params, z, Signal::reward, 1.0)(0), 0.5, 1e-15);
}

TEST(SemiGradient, EtaChannelIgnoresZeta) {
  CriticFixture f(2, Activation::gelu);
  Rng rng(12);
  Transition z;
  z.s = 1;
  z.a = 1;
  z.s_next = 2;
  z.a_next = 0;
  z.c_val = -0.3;
  CriticParams params{0.1, f.critic.net().init_snapshot(), 1.0};
  const double before = critic_semi_gradient(f.critic, params, z, Signal::cost, 0.5)(0);
  params.zeta += random_vector(params.zeta.size(), rng);
  EXPECT_EQ(critic_semi_gradient(f.critic, params, z, Signal::cost, 0.5)(0), before);
}

TEST(SemiGradient, MissingNextActionThrows) {
  CriticFixture f(1, Activation::identity);
  EXPECT_THROW(critic_semi_gradient(f.critic, initial_params(f.critic.net(), 1.0), Transition{},
                                    Signal::reward, 1.0),
               InvalidArgument);
}

TEST(SemiGradient, PopulationMeanMatchesLinearizedSystem) {
  // A one-layer identity network is linear in zeta, so it equals its linearization.
  CriticFixture f(1, Activation::identity, 4);
  const ExactEvaluation eval = evaluate_exact(f.model, f.policy);
  const LinearizedCriticSystem sys =
      linearized_critic_system(f.model, f.policy, Signal::reward, f.critic.linearization(), 0.7);
  Rng rng(13);
  const Eigen::VectorXd& zeta0 = f.critic.net().init_snapshot();
  const CriticParams params{0.35, zeta0 + random_vector(zeta0.size(), rng), 10.0};
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(1 + zeta0.size());
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      for (int t = 0; t < 3; ++t) {
        for (int b = 0; b < 2; ++b) {
          const double w = eval.nu_pi(s, a) * f.model.transition(s, a, t) * eval.pi(t, b);
          Transition z{s, a, t, b, f.model.reward()(s, a), f.model.cost()(s, a)};
          mean += w * critic_semi_gradient(f.critic, params, z, Signal::reward, 0.7);
        }
      }
    }
  }
  Eigen::VectorXd xi(1 + zeta0.size());
  xi << params.eta, params.zeta - zeta0;
  EXPECT_LE((mean - (sys.A * xi - sys.b)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(BoundCritic, GradCombinationMatchesDenseProduct) {
  CriticFixture f(3, Activation::sigmoid, 6);
  Rng rng(14);
  const Eigen::VectorXd coeffs = random_vector(6, rng);
  Eigen::VectorXd zeta = f.critic.net().init_snapshot();
  f.critic.add_grad_combination(zeta, coeffs);
  const Eigen::VectorXd expected = f.critic.net().init_snapshot() + f.critic.init_grads() * coeffs;
  EXPECT_LE((zeta - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundCritic, LinearizationErrorShrinksWithWidth) {
  constexpr double kRadius = 1.0;
  std::vector<double> medians;
  for (int m : {64, 256, 1024}) {
    std::vector<double> errors;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CmdpModel model = garnet(2, 2, 2, ConstraintMode::uniform, 3);
      Rng rng(seed);
      const BoundCritic critic(init_network(2, m, 4, Activation::gelu, rng),
                               build_feature_map(model, FeatureMode::one_hot, 4, rng));
      const Eigen::VectorXd& zeta0 = critic.net().init_snapshot();
      const Eigen::VectorXd dir = random_vector(zeta0.size(), rng).normalized();
      const Eigen::VectorXd zeta = zeta0 + kRadius * uniform01(rng) * dir;
      errors.push_back((critic.values(zeta) - critic.linearized_values(zeta)).cwiseAbs().maxCoeff());
    }
    std::sort(errors.begin(), errors.end());
    medians.push_back(errors[2]);
  }
  EXPECT_GE(medians[0], medians[1]);
  EXPECT_GE(medians[1], medians[2]);
}

TEST(CriticLoop, ZeroIterationsReturnsStart) {
  CriticFixture f(2, Activation::gelu);
  const CmdpModel& model = f.model;
  TrajectoryCursor cursor(model, 1);
  const CriticParams xi = critic_inner_loop(f.critic, Signal::reward, model, f.policy,
                                            {0, 1.0, 1.0, 8, 2.0}, cursor);
  EXPECT_EQ(xi.eta, 0.0);
  EXPECT_EQ(xi.zeta, f.critic.net().init_snapshot());
  EXPECT_EQ(cursor.total_steps(), 0);
}

TEST(CriticLoop, StaysInsideBall) {
  CriticFixture f(2, Activation::gelu);
  TrajectoryCursor cursor(f.model, 2);
  const CriticParams xi = critic_inner_loop(f.critic, Signal::cost, f.model, f.policy,
                                            {200, 50.0, 0.01, 8, 0.05}, cursor);
  EXPECT_LE((xi.zeta - f.critic.net().init_snapshot()).norm(), 0.05 * (1 + 1e-12));
}

TEST(CriticLoop, EtaTracksAverageCost) {
  CriticFixture f(2, Activation::gelu, 64);
  const ExactEvaluation eval = evaluate_exact(f.model, f.policy);
  TrajectoryCursor cursor(f.model, 3);
  const CriticParams xi = critic_inner_loop(f.critic, Signal::cost, f.model, f.policy,
                                            {3000, 1.0, 0.01, 2, 10.0}, cursor);
  EXPECT_NEAR(xi.eta, eval.cost.J, 0.1);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(15);
  const CriticNet net = init_network(2, 5, 3, Activation::elu, rng);
  const Eigen::VectorXd zeta = net.init_snapshot() + 1e-3 * random_vector(net.param_count(), rng);
  const auto [loaded, loaded_zeta] = parse_checkpoint(dump_checkpoint(net, zeta));
  EXPECT_EQ(loaded.depth(), 2);
  EXPECT_EQ(loaded.activation(), Activation::elu);
  EXPECT_EQ(loaded.head(), net.head());
  EXPECT_EQ(loaded.init_snapshot(), net.init_snapshot());
  EXPECT_EQ(loaded_zeta, zeta);
  EXPECT_THROW(parse_checkpoint("{\"depth\": 1"), ParseError);
}

}  // namespace
}  // namespace pdnac
