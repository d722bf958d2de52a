#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pdnac/cmdp.hpp"
#include "pdnac/errors.hpp"
#include "pdnac/neural_critic.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/simplex.hpp"

namespace pdnac {
namespace {

CmdpModel one_state(double r0, double r1, double c0, double c1) {
  Eigen::MatrixXd r(1, 2), c(1, 2);
  r << r0, r1;
  c << c0, c1;
  return CmdpModel(1, 2, {1.0, 1.0}, r, c, Eigen::VectorXd::Ones(1));
}

// Single-action model whose kernel is exactly `P`.
CmdpModel chain_model(const Eigen::MatrixXd& P) {
  const int S = static_cast<int>(P.rows());
  std::vector<double> flat;
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < S; ++t) flat.push_back(P(s, t));
  }
  return CmdpModel(S, 1, flat, Eigen::MatrixXd::Zero(S, 1), Eigen::MatrixXd::Zero(S, 1),
                   Eigen::VectorXd::Constant(S, 1.0 / S));
}

TEST(Stationary, TwoStateHandSolve) {
  Eigen::MatrixXd P(2, 2);
  P << 0.9, 0.1, 0.5, 0.5;
  const Eigen::VectorXd d = stationary_distribution(P);
  EXPECT_NEAR(d(0), 5.0 / 6.0, 1e-14);
  EXPECT_NEAR(d(1), 1.0 / 6.0, 1e-14);
}

TEST(Stationary, DoublyStochasticIsUniform) {
  Eigen::MatrixXd P(3, 3);
  P << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  EXPECT_TRUE(stationary_distribution(P).isApprox(Eigen::Vector3d::Constant(1.0 / 3.0), 1e-13));
}

TEST(Stationary, PeriodicChainRejected) {
  Eigen::MatrixXd P(2, 2);
  P << 0, 1, 1, 0;
  EXPECT_THROW(stationary_distribution(P), ErgodicityError);
}

TEST(Stationary, ReducibleChainNamesClasses) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3);
  try {
    stationary_distribution(P);
    FAIL();
  } catch (const ErgodicityError& e) {
    EXPECT_NE(std::string(e.what()).find("class"), std::string::npos) << e.what();
  }
}

TEST(EvaluateExact, OneStateHandSolve) {
  const CmdpModel model = one_state(1, 0, 0, 0);
  const ExactEvaluation eval = evaluate_exact(model, SoftmaxPolicy::tabular(1, 2));
  EXPECT_NEAR(eval.reward.J, 0.5, 1e-15);
  EXPECT_NEAR(eval.reward.Q(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(eval.reward.Q(0, 1), -0.5, 1e-15);
  EXPECT_NEAR(eval.reward.V(0), 0.0, 1e-15);
}

TEST(EvaluateExact, ConstantSignalHasZeroQ) {
  const CmdpModel base = garnet(4, 3, 2, ConstraintMode::uniform, 3);
  const CmdpModel model(4, 3, base.flat_transition(), Eigen::MatrixXd::Constant(4, 3, 0.7),
                        base.cost(), base.initial_dist());
  const ExactEvaluation eval = evaluate_exact(model, SoftmaxPolicy::tabular(4, 3));
  EXPECT_NEAR(eval.reward.J, 0.7, 1e-13);
  EXPECT_LE(eval.reward.Q.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PolicyGradient, OneStateClosedForm) {
  const CmdpModel model = one_state(1, 0, 0, 0);
  const Eigen::VectorXd grad = exact_policy_gradient(model, SoftmaxPolicy::tabular(1, 2), Signal::reward);
  EXPECT_NEAR(grad(0), 0.25, 1e-15);
  EXPECT_NEAR(grad(1), -0.25, 1e-15);
}

TEST(PolicyGradient, ConstantRewardGivesZero) {
  const CmdpModel model = one_state(0.3, 0.3, 0, 0);
  EXPECT_LE(exact_policy_gradient(model, SoftmaxPolicy::tabular(1, 2), Signal::reward).norm(), 1e-15);
}

TEST(Fisher, OneStateClosedForm) {
  const Eigen::MatrixXd F = exact_fisher(one_state(1, 0, 0, 0), SoftmaxPolicy::tabular(1, 2));
  Eigen::Matrix2d expected;
  expected << 0.25, -0.25, -0.25, 0.25;
  EXPECT_TRUE(F.isApprox(expected, 1e-14));
}

TEST(Fisher, PsdWithPerStateKernel) {
  const CmdpModel model = garnet(4, 3, 2, ConstraintMode::uniform, 8);
  Rng rng(3);
  const SoftmaxPolicy policy =
      SoftmaxPolicy::tabular(4, 3).with_theta(Eigen::VectorXd::Random(12));
  const Eigen::MatrixXd F = exact_fisher(model, policy);
  EXPECT_LE((F - F.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  for (int s = 0; s < 4; ++s) {
    Eigen::VectorXd ones = Eigen::VectorXd::Zero(12);
    ones.segment(3 * s, 3).setOnes();
    EXPECT_LE((F * ones).norm(), 1e-13);
  }
}

TEST(ExactNpg, ResidualOnRandomGarnets) {
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int S = 2 + static_cast<int>(seed % 5);
    const int A = 2 + static_cast<int>(seed % 3);
    const CmdpModel model = garnet(S, A, 2, ConstraintMode::uniform, seed);
    const SoftmaxPolicy policy =
        SoftmaxPolicy::tabular(S, A).with_theta(Eigen::VectorXd::Random(S * A));
    for (Signal g : kSignals) {
      const Eigen::VectorXd w = exact_npg(model, policy, g);
      const Eigen::VectorXd residual =
          exact_fisher(model, policy) * w - exact_policy_gradient(model, policy, g);
      EXPECT_LE(residual.norm(), 1e-8);
    }
  }
}

TEST(ExactNpg, ZeroGradientGivesZero) {
  EXPECT_LE(exact_npg(one_state(0.3, 0.3, 0, 0), SoftmaxPolicy::tabular(1, 2), Signal::reward).norm(),
            1e-15);
}

TEST(ExactNpg, IdentityFisherReturnsGradient) {
  const Eigen::Vector3d grad(0.1, -0.2, 0.3);
  EXPECT_TRUE(pseudo_solve(Eigen::Matrix3d::Identity(), grad).isApprox(grad, 1e-14));
}

TEST(ExactNpg, OutOfRangeGradientThrows) {
  Eigen::Matrix2d F;
  F << 1, 0, 0, 0;
  EXPECT_THROW(pseudo_solve(F, Eigen::Vector2d(1.0, 1.0)), RangeError);
}

TEST(ConstrainedLp, OneStateHandValue) {
  const ConstrainedOptimum opt = solve_constrained_optimum(one_state(1, 0, -1, 1));
  EXPECT_NEAR(opt.J_r_star, 0.5, 1e-10);
  EXPECT_NEAR(opt.nu_star(0, 0), 0.5, 1e-10);
  EXPECT_NEAR(opt.nu_star(0, 1), 0.5, 1e-10);
}

TEST(ConstrainedLp, InfeasibleNamesConstraint) {
  try {
    solve_constrained_optimum(one_state(1, 0, -1, -1));
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("cost"), std::string::npos) << e.what();
  }
}

TEST(ConstrainedLp, InactiveConstraintMatchesPolicyIteration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CmdpModel base = garnet(4, 3, 2, ConstraintMode::uniform, seed);
    const CmdpModel model(4, 3, base.flat_transition(), base.reward(),
                          Eigen::MatrixXd::Constant(4, 3, 0.5), base.initial_dist());
    EXPECT_NEAR(solve_constrained_optimum(model).J_r_star, solve_unconstrained_optimum(model).J_star,
                1e-9);
  }
}

TEST(ConstrainedLp, MatchesExternalSolverOnLargerGarnets) {
  // Reference values from an independent interior-point/simplex solver.
  struct Case {
    int S;
    std::uint64_t seed;
    double J;
  };
  for (const Case& c : {Case{20, 6, 0.8436602292973282}, Case{30, 6, 0.837838817598275},
                        Case{50, 7, 0.854676766628432}, Case{80, 6, 0.8364257925729689}}) {
    const CmdpModel model = garnet(c.S, 4, 3, ConstraintMode::slater, c.seed);
    EXPECT_NEAR(solve_constrained_optimum(model).J_r_star, c.J, 1e-8) << "S=" << c.S;
  }
}

TEST(Simplex, SmallLp) {
  // min -x - y  s.t. x + y + s = 1, x - y + t = 0.5.
  Eigen::MatrixXd A(2, 4);
  A << 1, 1, 1, 0, 1, -1, 0, 1;
  const LpResult res = solve_lp(A, Eigen::Vector2d(1.0, 0.5), Eigen::Vector4d(-2, -1, 0, 0));
  ASSERT_EQ(res.status, LpStatus::optimal);
  EXPECT_NEAR(res.objective, -1.75, 1e-12);
  EXPECT_NEAR(res.x(0), 0.75, 1e-12);
}

TEST(Simplex, DetectsInfeasibleAndUnbounded) {
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  EXPECT_EQ(solve_lp(A, Eigen::VectorXd::Constant(1, -1.0), Eigen::Vector2d(1, 1)).status,
            LpStatus::infeasible);
  A << 1, -1;
  EXPECT_EQ(solve_lp(A, Eigen::VectorXd::Constant(1, 0.0), Eigen::Vector2d(-1, 0)).status,
            LpStatus::unbounded);
}

TEST(Simplex, BealeCyclingExample) {
  Eigen::MatrixXd A(3, 7);
  A << 1, 0, 0, 0.25, -8, -1, 9,
       0, 1, 0, 0.5, -12, -0.5, 3,
       0, 0, 1, 0, 0, 1, 0;
  Eigen::VectorXd c(7);
  c << 0, 0, 0, -0.75, 20, -0.5, 6;
  const LpResult res = solve_lp(A, Eigen::Vector3d(0, 0, 1), c);
  ASSERT_EQ(res.status, LpStatus::optimal);
  EXPECT_NEAR(res.objective, -1.25, 1e-12);
}

TEST(Simplex, RedundantRowsDropped) {
  // Second row duplicates the first.
  Eigen::MatrixXd A(3, 3);
  A << 1, 1, 1, 2, 2, 2, 1, -1, 0;
  const LpResult res = solve_lp(A, Eigen::Vector3d(1, 2, 0), Eigen::Vector3d(-1, 0, 0));
  ASSERT_EQ(res.status, LpStatus::optimal);
  EXPECT_NEAR(res.objective, -0.5, 1e-12);
}

// Independent power-iteration mixing time.
std::int64_t brute_force_mixing(const Eigen::MatrixXd& P) {
  const Eigen::VectorXd d = stationary_distribution(P);
  Eigen::MatrixXd power = P;
  for (std::int64_t t = 1;; ++t) {
    double worst = 0.0;
    for (int s = 0; s < P.rows(); ++s) {
      worst = std::max(worst, 0.5 * (power.row(s).transpose() - d).cwiseAbs().sum());
    }
    if (worst <= 0.25) return t;
    power = power * P;
  }
}

TEST(MixingTime, OneStateIsOne) {
  EXPECT_EQ(mixing_time(Eigen::MatrixXd::Ones(1, 1)), 1);
}

TEST(MixingTime, MatchesPowerIteration) {
  Eigen::MatrixXd P(2, 2);
  P << 0.9, 0.1, 0.5, 0.5;
  EXPECT_EQ(mixing_time(P), brute_force_mixing(P));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CmdpModel model = garnet(5, 2, 1, ConstraintMode::uniform, seed);
    const Eigen::MatrixXd K = induced_kernel(model, SoftmaxPolicy::tabular(5, 2));
    const std::int64_t t = mixing_time(K);
    EXPECT_EQ(t, brute_force_mixing(K));
    const Eigen::VectorXd d = stationary_distribution(K);
    EXPECT_LE(tv_to_stationarity(K, d, t), 0.25);
    if (t > 1) EXPECT_GT(tv_to_stationarity(K, d, t - 1), 0.25);
  }
}

TEST(MixingTime, NearReducibleHitsCap) {
  const double eps = 1e-7;
  Eigen::MatrixXd P(2, 2);
  P << 1 - eps, eps, eps, 1 - eps;
  EXPECT_THROW(mixing_time(P), MixingCapExceeded);
  EXPECT_THROW(mixing_time(chain_model(P), SoftmaxPolicy::tabular(2, 1)), MixingCapExceeded);
}

CriticLinearization random_linearization(int pairs, int p, Rng& rng) {
  std::normal_distribution<double> normal;
  CriticLinearization lin{Eigen::MatrixXd(pairs, p), Eigen::VectorXd(pairs)};
  for (auto& x : lin.grads.reshaped()) x = normal(rng);
  for (auto& x : lin.init_values) x = normal(rng);
  return lin;
}

TEST(LinearizedSystem, FirstRowFixesEtaAtJ) {
  const CmdpModel model = garnet(3, 2, 2, ConstraintMode::uniform, 2);
  const SoftmaxPolicy policy = SoftmaxPolicy::tabular(3, 2);
  Rng rng(5);
  const CriticLinearization lin = random_linearization(6, 8, rng);
  const LinearizedCriticSystem sys = linearized_critic_system(model, policy, Signal::reward, lin, 2.0);
  const ExactEvaluation eval = evaluate_exact(model, policy);
  EXPECT_DOUBLE_EQ(sys.A(0, 0), 2.0);
  EXPECT_LE(sys.A.row(0).tail(8).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(sys.b(0), 2.0 * eval.reward.J, 1e-14);
  // Rank S*A features make the system consistent.
  EXPECT_NEAR(sys.xi_star(0), eval.reward.J, 1e-10);
}

TEST(LinearizedSystem, ConstantFeatureDirectionInKernel) {
  const CmdpModel model = garnet(3, 2, 3, ConstraintMode::uniform, 4);
  Rng rng(6);
  CriticLinearization lin = random_linearization(6, 4, rng);
  lin.grads.col(0).setConstant(0.3);
  const LinearizedCriticSystem sys =
      linearized_critic_system(model, SoftmaxPolicy::tabular(3, 2), Signal::cost, lin, 1.0);
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(5);
  direction(1) = 1.0;
  EXPECT_LE((sys.A.bottomRows(4) * direction).norm(), 1e-14);
}

TEST(LinearizedSystem, PositiveOffKernelForLargeCGamma) {
  const CmdpModel model = garnet(3, 2, 2, ConstraintMode::uniform, 9);
  Rng rng(7);
  const CriticLinearization lin = random_linearization(6, 6, rng);
  const LinearizedCriticSystem sys =
      linearized_critic_system(model, SoftmaxPolicy::tabular(3, 2), Signal::reward, lin, 50.0);
  // Restrict the quadratic form to the orthogonal complement of ker(A).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.A, Eigen::ComputeFullV);
  const Eigen::Index rank = (svd.singularValues().array() > 1e-10).count();
  ASSERT_LT(rank, sys.A.cols());
  const Eigen::MatrixXd basis = svd.matrixV().leftCols(rank);
  const Eigen::MatrixXd form = basis.transpose() * (sys.A + sys.A.transpose()) * basis;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * form);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

}  // namespace
}  // namespace pdnac
