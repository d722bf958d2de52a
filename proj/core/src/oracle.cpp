#include "pdnac/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pdnac/errors.hpp"
#include "pdnac/simplex.hpp"

namespace pdnac {

namespace {

Eigen::MatrixXd kernel_from_table(const CmdpModel& model, const Eigen::MatrixXd& pi) {
  const int S = model.n_states();
  const int A = model.n_actions();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      P.row(s) += pi(s, a) * model.kernel().row(model.pair(s, a));
    }
  }
  return P;
}

// Pair-indexed vector of g(s, a).
Eigen::VectorXd pair_signal(const CmdpModel& model, Signal g) {
  const RowMatrix table = model.signal(g);
  return Eigen::Map<const Eigen::VectorXd>(table.data(), table.size());
}

Eigen::VectorXd pair_vector(const Eigen::MatrixXd& table) {
  const RowMatrix row_major = table;
  return Eigen::Map<const Eigen::VectorXd>(row_major.data(), row_major.size());
}

Eigen::MatrixXd deterministic_table(const CmdpModel& model, const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != model.n_states()) {
    throw InvalidArgument("deterministic policy needs one action per state");
  }
  Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(model.n_states(), model.n_actions());
  for (int s = 0; s < model.n_states(); ++s) {
    model.check_action(actions[static_cast<std::size_t>(s)]);
    pi(s, actions[static_cast<std::size_t>(s)]) = 1.0;
  }
  return pi;
}

SignalValues evaluate_signal(const CmdpModel& model, const Eigen::MatrixXd& P,
                             const Eigen::VectorXd& d, const Eigen::MatrixXd& pi,
                             const Eigen::MatrixXd& nu, Signal g) {
  const int S = model.n_states();
  const Eigen::MatrixXd& table = model.signal(g);
  SignalValues out;
  out.J = nu.cwiseProduct(table).sum();
  const Eigen::VectorXd g_pi = pi.cwiseProduct(table).rowwise().sum();
  // (I - P + 1 d^T) is nonsingular for an ergodic chain and its solution
  // satisfies d^T V = 0.
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(S, S) - P + Eigen::VectorXd::Ones(S) * d.transpose();
  out.V = system.partialPivLu().solve(g_pi - Eigen::VectorXd::Constant(S, out.J));
  const Eigen::VectorXd next_v = model.kernel() * out.V;  // pair-indexed E[V(s')]
  out.Q.resize(S, model.n_actions());
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < model.n_actions(); ++a) {
      out.Q(s, a) = table(s, a) - out.J + next_v(model.pair(s, a));
    }
  }
  out.advantage = out.Q.colwise() - out.V;
  return out;
}

std::string format_states(const std::vector<int>& states) {
  return fmt::format("{{{}}}", fmt::join(states, ", "));
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& P, std::int64_t t) {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  Eigen::MatrixXd base = P;
  while (t > 0) {
    if (t & 1) result = result * base;
    t >>= 1;
    if (t > 0) base = base * base;
  }
  return result;
}

double worst_tv(const Eigen::MatrixXd& Pt, const Eigen::VectorXd& d) {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < Pt.rows(); ++s) {
    worst = std::max(worst, 0.5 * (Pt.row(s).transpose() - d).cwiseAbs().sum());
  }
  return worst;
}

ExactEvaluation evaluate_table(const CmdpModel& model, const Eigen::MatrixXd& pi) {
  ExactEvaluation eval;
  const Eigen::MatrixXd P = kernel_from_table(model, pi);
  eval.d_pi = stationary_distribution(P);
  eval.pi = pi;
  eval.nu_pi = pi.array().colwise() * eval.d_pi.array();
  eval.reward = evaluate_signal(model, P, eval.d_pi, pi, eval.nu_pi, Signal::reward);
  eval.cost = evaluate_signal(model, P, eval.d_pi, pi, eval.nu_pi, Signal::cost);
  return eval;
}

}  // namespace

Eigen::MatrixXd induced_kernel(const CmdpModel& model, const SoftmaxPolicy& policy) {
  return kernel_from_table(model, policy.prob_table());
}

Eigen::MatrixXd pair_kernel(const CmdpModel& model, const Eigen::MatrixXd& pi) {
  const int S = model.n_states();
  const int A = model.n_actions();
  Eigen::MatrixXd M(S * A, S * A);
  for (int row = 0; row < S * A; ++row) {
    for (int s2 = 0; s2 < S; ++s2) {
      for (int a2 = 0; a2 < A; ++a2) {
        M(row, s2 * A + a2) = model.kernel()(row, s2) * pi(s2, a2);
      }
    }
  }
  return M;
}

void check_ergodic(const Eigen::MatrixXd& kernel) {
  const int S = static_cast<int>(kernel.rows());
  if (kernel.cols() != S) throw InvalidArgument("kernel must be square");

  // Transitive closure of the support graph.
  std::vector<std::vector<char>> reach(S, std::vector<char>(S, 0));
  for (int i = 0; i < S; ++i) {
    reach[i][i] = 1;
    for (int j = 0; j < S; ++j) {
      if (kernel(i, j) > 0.0) reach[i][j] = 1;
    }
  }
  for (int k = 0; k < S; ++k) {
    for (int i = 0; i < S; ++i) {
      if (!reach[i][k]) continue;
      for (int j = 0; j < S; ++j) {
        if (reach[k][j]) reach[i][j] = 1;
      }
    }
  }

  bool irreducible = true;
  for (int i = 0; i < S && irreducible; ++i) {
    for (int j = 0; j < S; ++j) {
      if (!reach[i][j]) {
        irreducible = false;
        break;
      }
    }
  }
  if (!irreducible) {
    // Communicating classes; a class is closed (recurrent) when nothing
    // outside it is reachable.
    std::vector<int> label(S, -1);
    std::vector<std::vector<int>> classes;
    for (int i = 0; i < S; ++i) {
      if (label[i] >= 0) continue;
      std::vector<int> members;
      for (int j = 0; j < S; ++j) {
        if (reach[i][j] && reach[j][i]) {
          label[j] = static_cast<int>(classes.size());
          members.push_back(j);
        }
      }
      classes.push_back(std::move(members));
    }
    std::vector<std::string> closed;
    std::vector<int> transient;
    for (const auto& members : classes) {
      bool is_closed = true;
      for (int j = 0; j < S && is_closed; ++j) {
        if (reach[members.front()][j] && label[j] != label[members.front()]) is_closed = false;
      }
      if (is_closed) {
        closed.push_back(format_states(members));
      } else {
        transient.insert(transient.end(), members.begin(), members.end());
      }
    }
    std::sort(transient.begin(), transient.end());
    throw ErgodicityError(fmt::format(
        "induced chain is not irreducible: recurrent classes {}; transient states {}",
        fmt::join(closed, " "), format_states(transient)));
  }

  // Period = gcd over edges (u, v) of level(u) + 1 - level(v), BFS levels from 0.
  std::vector<int> level(S, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    for (int v = 0; v < S; ++v) {
      if (kernel(u, v) > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  int period = 0;
  for (int u = 0; u < S; ++u) {
    for (int v = 0; v < S; ++v) {
      if (kernel(u, v) > 0.0) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
    }
  }
  if (period != 1) {
    throw ErgodicityError(fmt::format("induced chain is periodic with period {}", period));
  }
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& kernel) {
  check_ergodic(kernel);
  const Eigen::Index S = kernel.rows();
  Eigen::MatrixXd system = kernel.transpose() - Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
  system.row(S - 1).setOnes();
  rhs(S - 1) = 1.0;
  Eigen::VectorXd d = system.fullPivLu().solve(rhs);
  // One step of iterative refinement keeps the residual at machine precision.
  d += system.fullPivLu().solve(rhs - system * d);
  return d;
}

Eigen::VectorXd stationary_distribution(const CmdpModel& model, const SoftmaxPolicy& policy) {
  return stationary_distribution(induced_kernel(model, policy));
}

ExactEvaluation evaluate_exact(const CmdpModel& model, const SoftmaxPolicy& policy) {
  if (policy.n_states() != model.n_states() || policy.n_actions() != model.n_actions()) {
    throw InvalidArgument("policy and model disagree on S or A");
  }
  return evaluate_table(model, policy.prob_table());
}

ExactEvaluation evaluate_exact(const CmdpModel& model, const Eigen::MatrixXd& pi) {
  if (pi.rows() != model.n_states() || pi.cols() != model.n_actions()) {
    throw InvalidArgument("action table must be S x A");
  }
  return evaluate_table(model, pi);
}

Eigen::VectorXd exact_policy_gradient(const ExactEvaluation& eval, const SoftmaxPolicy& policy,
                                      Signal g) {
  const SignalValues& values = eval[g];
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy.dim());
  for (int s = 0; s < policy.n_states(); ++s) {
    for (int a = 0; a < policy.n_actions(); ++a) {
      grad += eval.nu_pi(s, a) * values.advantage(s, a) * policy.score(s, a);
    }
  }
  return grad;
}

Eigen::VectorXd exact_policy_gradient(const CmdpModel& model, const SoftmaxPolicy& policy,
                                      Signal g) {
  return exact_policy_gradient(evaluate_exact(model, policy), policy, g);
}

Eigen::MatrixXd exact_fisher(const ExactEvaluation& eval, const SoftmaxPolicy& policy) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(policy.dim(), policy.dim());
  for (int s = 0; s < policy.n_states(); ++s) {
    for (int a = 0; a < policy.n_actions(); ++a) {
      const Eigen::VectorXd sc = policy.score(s, a);
      F.noalias() += eval.nu_pi(s, a) * sc * sc.transpose();
    }
  }
  return 0.5 * (F + F.transpose());
}

Eigen::MatrixXd exact_fisher(const CmdpModel& model, const SoftmaxPolicy& policy) {
  return exact_fisher(evaluate_exact(model, policy), policy);
}

namespace {
constexpr double kPinvCutoff = 1e-10;
constexpr double kRangeTol = 1e-8;
}  // namespace

double min_positive_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = kPinvCutoff * lambda.maxCoeff();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) return lambda(i);
  }
  return 0.0;
}

Eigen::VectorXd pseudo_solve(const Eigen::MatrixXd& fisher, const Eigen::VectorXd& grad) {
  if (fisher.rows() != grad.size() || fisher.cols() != grad.size()) {
    throw InvalidArgument("pseudo_solve: dimension mismatch");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fisher);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& U = eig.eigenvectors();
  const double cutoff = kPinvCutoff * std::max(lambda.maxCoeff(), 0.0);
  Eigen::VectorXd coeff = U.transpose() * grad;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    coeff(i) = lambda(i) > cutoff ? coeff(i) / lambda(i) : 0.0;
  }
  Eigen::VectorXd omega = U * coeff;
  const double residual = (fisher * omega - grad).norm();
  if (residual > kRangeTol) {
    throw RangeError(fmt::format(
        "gradient is not in the range of the Fisher matrix (residual {:.3e} > 1e-8)", residual));
  }
  return omega;
}

Eigen::VectorXd exact_npg(const CmdpModel& model, const SoftmaxPolicy& policy, Signal g) {
  const ExactEvaluation eval = evaluate_exact(model, policy);
  return pseudo_solve(exact_fisher(eval, policy), exact_policy_gradient(eval, policy, g));
}

ConstrainedOptimum solve_constrained_optimum(const CmdpModel& model) {
  const int S = model.n_states();
  const int A = model.n_actions();
  const int n_nu = S * A;
  const Eigen::VectorXd r = pair_signal(model, Signal::reward);
  const Eigen::VectorXd c = pair_signal(model, Signal::cost);

  // Columns: nu(s, a) in pair order, then the slack of sum nu c >= 0.
  // Rows: flow equations for states 0..S-2 (the last one is their negated
  // sum), normalization, cost row.
  auto flow_rows = [&](Eigen::MatrixXd& M) {
    for (int s2 = 0; s2 + 1 < S; ++s2) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          M(s2, model.pair(s, a)) = (s == s2 ? 1.0 : 0.0) - model.transition(s, a, s2);
        }
      }
    }
    M.row(S - 1).head(n_nu).setOnes();
  };

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(S + 1, n_nu + 1);
  flow_rows(M);
  M.row(S).head(n_nu) = c.transpose();
  M(S, n_nu) = -1.0;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S + 1);
  rhs(S - 1) = 1.0;
  Eigen::VectorXd objective = Eigen::VectorXd::Zero(n_nu + 1);
  objective.head(n_nu) = -r;

  const LpResult lp = solve_lp(M, rhs, objective);
  if (lp.status == LpStatus::infeasible) {
    if (lp.violated_row >= 0 && lp.violated_row < S - 1) {
      throw InfeasibleError(fmt::format(
          "occupancy LP infeasible: flow conservation at state {} cannot be met",
          lp.violated_row));
    }
    // Only the cost row can be at fault: report the best achievable J_c.
    Eigen::MatrixXd M_flow = Eigen::MatrixXd::Zero(S, n_nu);
    flow_rows(M_flow);
    Eigen::VectorXd rhs_flow = Eigen::VectorXd::Zero(S);
    rhs_flow(S - 1) = 1.0;
    const LpResult best_cost = solve_lp(M_flow, rhs_flow, -c);
    const double max_jc = best_cost.status == LpStatus::optimal ? -best_cost.objective : NAN;
    throw InfeasibleError(fmt::format(
        "occupancy LP infeasible: cost constraint sum nu(s,a) c(s,a) >= 0 is violated by every "
        "policy (largest achievable J_c = {:.6g})",
        max_jc));
  }
  if (lp.status != LpStatus::optimal) throw Error("occupancy LP unexpectedly unbounded");

  ConstrainedOptimum out;
  out.nu_star.resize(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) out.nu_star(s, a) = std::max(0.0, lp.x(model.pair(s, a)));
  }
  out.J_r_star = out.nu_star.cwiseProduct(model.reward()).sum();
  out.J_c = out.nu_star.cwiseProduct(model.cost()).sum();
  out.policy.resize(S, A);
  for (int s = 0; s < S; ++s) {
    const double mass = out.nu_star.row(s).sum();
    if (mass > 1e-14) {
      out.policy.row(s) = out.nu_star.row(s) / mass;
    } else {
      out.policy.row(s).setConstant(1.0 / A);
    }
  }
  return out;
}

double deterministic_policy_value(const CmdpModel& model, const std::vector<int>& actions,
                                  Signal g) {
  return evaluate_table(model, deterministic_table(model, actions))[g].J;
}

UnconstrainedOptimum solve_unconstrained_optimum(const CmdpModel& model, Signal g) {
  const int S = model.n_states();
  const int A = model.n_actions();
  const Eigen::MatrixXd& table = model.signal(g);
  std::vector<int> actions(static_cast<std::size_t>(S), 0);
  for (int iter = 0; iter < 10000; ++iter) {
    const ExactEvaluation eval = evaluate_table(model, deterministic_table(model, actions));
    const Eigen::VectorXd next_v = model.kernel() * eval[g].V;
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      const int current = actions[static_cast<std::size_t>(s)];
      double best = table(s, current) + next_v(model.pair(s, current));
      int best_a = current;
      for (int a = 0; a < A; ++a) {
        const double q = table(s, a) + next_v(model.pair(s, a));
        if (q > best + 1e-12) {
          best = q;
          best_a = a;
        }
      }
      if (best_a != current) {
        actions[static_cast<std::size_t>(s)] = best_a;
        changed = true;
      }
    }
    if (!changed) return {eval[g].J, actions};
  }
  throw Error("policy iteration did not converge");
}

double tv_to_stationarity(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& d,
                          std::int64_t t) {
  return worst_tv(matrix_power(kernel, t), d);
}

std::int64_t mixing_time(const Eigen::MatrixXd& kernel, std::int64_t cap) {
  const Eigen::VectorXd d = stationary_distribution(kernel);
  constexpr double kThreshold = 0.25;
  if (worst_tv(kernel, d) <= kThreshold) return 1;

  // Bracket: tv(lo) > 1/4 >= tv(hi).
  std::int64_t lo = 1;
  std::int64_t hi = 2;
  Eigen::MatrixXd P_hi = kernel * kernel;
  while (worst_tv(P_hi, d) > kThreshold) {
    if (hi >= cap) {
      throw MixingCapExceeded(fmt::format("mixing time exceeds the cap of {} steps", cap));
    }
    lo = hi;
    hi *= 2;
    P_hi = P_hi * P_hi;
  }
  if (hi > cap) {
    if (tv_to_stationarity(kernel, d, cap) > kThreshold) {
      throw MixingCapExceeded(fmt::format("mixing time exceeds the cap of {} steps", cap));
    }
    hi = cap;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (tv_to_stationarity(kernel, d, mid) <= kThreshold) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::int64_t mixing_time(const CmdpModel& model, const SoftmaxPolicy& policy, std::int64_t cap) {
  return mixing_time(induced_kernel(model, policy), cap);
}

LinearizedCriticSystem linearized_critic_system(const CmdpModel& model,
                                                const SoftmaxPolicy& policy, Signal g,
                                                const CriticLinearization& critic,
                                                double c_gamma) {
  const int n_pairs = model.n_pairs();
  const Eigen::MatrixXd& Psi = critic.grads;
  if (Psi.rows() != n_pairs || critic.init_values.size() != n_pairs) {
    throw InvalidArgument("critic linearization must have one row per (s, a) pair");
  }
  if (!(c_gamma > 0.0)) throw InvalidArgument("c_gamma must be positive");
  const ExactEvaluation eval = evaluate_exact(model, policy);
  const Eigen::VectorXd nu = pair_vector(eval.nu_pi);
  const Eigen::MatrixXd M = pair_kernel(model, eval.pi);
  const Eigen::VectorXd gvec = pair_signal(model, g);
  const Eigen::VectorXd& Q0 = critic.init_values;
  const Eigen::Index p = Psi.cols();

  LinearizedCriticSystem sys;
  sys.c_gamma = c_gamma;
  sys.A = Eigen::MatrixXd::Zero(p + 1, p + 1);
  sys.b = Eigen::VectorXd::Zero(p + 1);
  const Eigen::MatrixXd weighted = Psi.transpose() * nu.asDiagonal();  // p x SA
  sys.A(0, 0) = c_gamma;
  sys.A.block(1, 0, p, 1) = Psi.transpose() * nu;
  sys.A.block(1, 1, p, p) = weighted * (Psi - M * Psi);
  sys.b(0) = c_gamma * nu.dot(gvec);
  sys.b.tail(p) = weighted * (gvec - Q0 + M * Q0);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  sys.xi_star = svd.solve(sys.b);
  return sys;
}

}  // namespace pdnac
