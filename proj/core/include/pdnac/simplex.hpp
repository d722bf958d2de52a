#pragma once

#include <Eigen/Dense>

namespace pdnac {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Phase-1 optimum of the summed artificials; > tolerance means infeasible.
  double infeasibility = 0.0;
  /// Equality row whose artificial variable is largest at the phase-1 optimum,
  /// or -1 when feasible.
  int violated_row = -1;
};

/// Dense two-phase tableau simplex for
///
///     minimize c^T x   subject to   A x = b,  x >= 0.
///
/// Dantzig pricing, switching to Bland's rule during runs of degenerate
/// pivots so the method terminates on degenerate problems. Redundant equality rows are
/// detected at the end of phase 1 and dropped. Intended for small dense
/// problems (up to a few hundred columns).
LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  double tol = 1e-11);

}  // namespace pdnac
