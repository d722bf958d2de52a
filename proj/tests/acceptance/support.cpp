#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "pdnac/errors.hpp"
#include "pdnac/metrics_io.hpp"

namespace pdnac::acceptance::support {

Eigen::VectorXd random_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Eigen::VectorXd random_unit_ball(Eigen::Index n, Rng& rng) {
  const Eigen::VectorXd v = random_normal(n, rng);
  return v.normalized() * uniform01(rng);
}

double gradcheck_error(const CriticNet& net, const Eigen::VectorXd& zeta,
                       const Eigen::VectorXd& phi) {
  constexpr double h = 1e-6;
  const Eigen::VectorXd grad = grad_params(net, zeta, phi);
  Eigen::VectorXd probe = zeta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < zeta.size(); ++i) {
    probe(i) = zeta(i) + h;
    const double up = forward(net, probe, phi);
    probe(i) = zeta(i) - h;
    const double down = forward(net, probe, phi);
    probe(i) = zeta(i);
    worst = std::max(worst, std::abs((up - down) / (2.0 * h) - grad(i)));
  }
  return worst / std::max(grad.cwiseAbs().maxCoeff(), 1e-12);
}

std::string evaluation_invariant_failure(const CmdpModel& model, const ExactEvaluation& eval,
                                         double tol) {
  const int S = model.n_states();
  const int A = model.n_actions();
  const Eigen::VectorXd& d = eval.d_pi;
  if (std::abs(d.sum() - 1.0) > tol || d.minCoeff() < -tol) return "d is not a distribution";

  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      for (int t = 0; t < S; ++t) kernel(s, t) += eval.pi(s, a) * model.transition(s, a, t);
    }
  }
  if ((kernel.transpose() * d - d).cwiseAbs().maxCoeff() > tol) return "d P != d";

  for (int s = 0; s < S; ++s) {
    if (std::abs(eval.pi.row(s).sum() - 1.0) > tol) return "pi rows do not sum to 1";
    for (int a = 0; a < A; ++a) {
      if (std::abs(eval.nu_pi(s, a) - d(s) * eval.pi(s, a)) > tol) return "nu != d pi";
    }
  }

  for (Signal g : kSignals) {
    const SignalValues& v = eval[g];
    const Eigen::MatrixXd& signal = model.signal(g);
    const std::string name(to_string(g));
    if (std::abs(v.J - (eval.nu_pi.array() * signal.array()).sum()) > tol) {
      return name + ": J != sum nu g";
    }
    if (std::abs(d.dot(v.V)) > tol) return name + ": sum d V != 0";
    for (int s = 0; s < S; ++s) {
      if (std::abs(eval.pi.row(s).dot(v.Q.row(s)) - v.V(s)) > tol) return name + ": V != pi Q";
      if (std::abs(eval.pi.row(s).dot(v.advantage.row(s))) > tol) {
        return name + ": sum_a pi A != 0";
      }
      for (int a = 0; a < A; ++a) {
        double next = 0.0;
        for (int t = 0; t < S; ++t) next += model.transition(s, a, t) * v.V(t);
        const double residual = v.Q(s, a) - (signal(s, a) - v.J + next);
        if (std::abs(residual) > tol) {
          return fmt::format("{}: Bellman residual {:.3e} at ({}, {})", name, residual, s, a);
        }
        if (std::abs(v.advantage(s, a) - (v.Q(s, a) - v.V(s))) > tol) return name + ": A != Q - V";
      }
    }
  }
  return {};
}

Eigen::VectorXd finite_difference_gradient(const CmdpModel& model, const SoftmaxPolicy& policy,
                                           Signal g) {
  constexpr double h = 1e-5;
  const Eigen::VectorXd theta = policy.theta();
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += h;
    down(i) -= h;
    grad(i) = (evaluate_exact(model, policy.with_theta(up))[g].J -
               evaluate_exact(model, policy.with_theta(down))[g].J) /
              (2.0 * h);
  }
  return grad;
}

CmdpModel one_state_model(const std::vector<double>& reward, const std::vector<double>& cost) {
  const int A = static_cast<int>(reward.size());
  Eigen::MatrixXd r(1, A), c(1, A);
  for (int a = 0; a < A; ++a) {
    r(0, a) = reward[static_cast<std::size_t>(a)];
    c(0, a) = cost[static_cast<std::size_t>(a)];
  }
  return CmdpModel(1, A, std::vector<double>(static_cast<std::size_t>(A), 1.0), r, c,
                   Eigen::VectorXd::Ones(1));
}

std::vector<std::vector<int>> all_deterministic_policies(int n_states, int n_actions) {
  std::vector<std::vector<int>> out;
  std::vector<int> actions(static_cast<std::size_t>(n_states), 0);
  while (true) {
    out.push_back(actions);
    int s = 0;
    while (s < n_states && ++actions[static_cast<std::size_t>(s)] == n_actions) {
      actions[static_cast<std::size_t>(s)] = 0;
      ++s;
    }
    if (s == n_states) return out;
  }
}

double centered_critic_mse(const BoundCritic& critic, const Eigen::VectorXd& zeta,
                           const Eigen::MatrixXd& nu, const Eigen::MatrixXd& target) {
  const Eigen::VectorXd q = critic.values(zeta);
  const int S = static_cast<int>(nu.rows());
  const int A = static_cast<int>(nu.cols());
  double mean = 0.0, square = 0.0;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double err = q(critic.pair(s, a)) - target(s, a);
      mean += nu(s, a) * err;
      square += nu(s, a) * err * err;
    }
  }
  return square - mean * mean;
}

CmdpModel active_constraint_garnet() {
  constexpr double kMargin = 0.05;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    CmdpModel model = garnet(4, 2, 2, ConstraintMode::uniform, seed);
    const ExactEvaluation uniform = evaluate_exact(model, SoftmaxPolicy::tabular(4, 2));
    if (uniform.cost.J >= 0.0) continue;
    double constrained = 0.0;
    try {
      constrained = solve_constrained_optimum(model).J_r_star;
    } catch (const InfeasibleError&) {
      continue;
    }
    const double unconstrained = solve_unconstrained_optimum(model).J_star;
    if (constrained - uniform.reward.J >= kMargin && unconstrained - constrained >= kMargin) {
      return model;
    }
  }
  throw InvariantViolation("no garnet with an active constraint found");
}

std::string csv_schema_failure(std::string_view csv, int rows) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) return "header mismatch";
  const auto fields = std::count(kMetricsHeader.begin(), kMetricsHeader.end(), ',');
  int count = 0;
  while (std::getline(in, line)) {
    if (std::count(line.begin(), line.end(), ',') != fields) {
      return fmt::format("row {} has the wrong field count", count);
    }
    ++count;
  }
  if (count != rows) return fmt::format("{} rows, expected {}", count, rows);
  return {};
}

}  // namespace pdnac::acceptance::support
