#include "pdnac/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "pdnac/errors.hpp"

namespace pdnac {

namespace {

constexpr double kPivotTol = 1e-7;

constexpr int kRefactorEvery = 32;

struct Tableau {
  Eigen::MatrixXd T;       // rows: constraints; last column: right-hand side
  Eigen::MatrixXd source;  // T before any pivot
  std::vector<int> basis;  // basic column per row

  Eigen::Index rhs() const { return T.cols() - 1; }

  void pivot(Eigen::Index row, Eigen::Index col) {
    T.row(row) /= T(row, col);
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
      if (i != row && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(row);
    }
    basis[static_cast<std::size_t>(row)] = static_cast<int>(col);
  }

  // Recomputes T = B^{-1} source from the current basis, discarding the
  // rounding error accumulated by successive pivots. Keeps T when B is
  // numerically singular.
  void refactor() {
    Eigen::MatrixXd B(T.rows(), T.rows());
    for (Eigen::Index i = 0; i < T.rows(); ++i) B.col(i) = source.col(basis[static_cast<std::size_t>(i)]);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return;
    Eigen::MatrixXd fresh = lu.solve(source);
    if (fresh.allFinite()) T = std::move(fresh);
  }

  void drop_row(Eigen::Index row) {
    const Eigen::Index last = T.rows() - 1;
    if (row != last) {
      T.row(row) = T.row(last);
      source.row(row) = source.row(last);
    }
    T.conservativeResize(last, Eigen::NoChange);
    source.conservativeResize(last, Eigen::NoChange);
    basis[static_cast<std::size_t>(row)] = basis.back();
    basis.pop_back();
  }
};

enum class Outcome { optimal, unbounded };

// Dantzig pricing; after kDegenerateRun consecutive degenerate pivots, Bland's
// rule (lowest-index entering and leaving variable) until the objective moves.
constexpr int kDegenerateRun = 20;

Outcome iterate(Tableau& tab, const Eigen::VectorXd& cost, Eigen::Index n_allowed, double tol) {
  const Eigen::Index m = tab.T.rows();
  const std::size_t max_iter = 100000;
  int degenerate = 0;
  int stale = 0;  // pivots since the last refactor
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    if (stale == kRefactorEvery) {
      tab.refactor();
      stale = 0;
    }
    Eigen::VectorXd basic_cost(m);
    for (Eigen::Index i = 0; i < m; ++i) basic_cost(i) = cost(tab.basis[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd reduced =
        cost.head(n_allowed) - (basic_cost.transpose() * tab.T.leftCols(n_allowed)).transpose();
    const bool bland = degenerate >= kDegenerateRun;

    Eigen::Index entering = -1;
    for (Eigen::Index j = 0; j < n_allowed; ++j) {
      if (reduced(j) >= -tol) continue;
      if (entering < 0 || (!bland && reduced(j) < reduced(entering))) entering = j;
      if (bland) break;
    }
    if (entering < 0 && stale > 0) {
      // Confirm optimality on a fresh tableau.
      stale = kRefactorEvery;
      continue;
    }
    if (entering < 0) return Outcome::optimal;

    // Dantzig: Harris two-pass ratio test, largest pivot among rows whose
    // ratio fits the tol-relaxed bound. Bland: lowest basic index among the
    // minimum-ratio rows.
    double bound = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double coef = tab.T(i, entering);
      if (coef > kPivotTol) bound = std::min(bound, (tab.T(i, tab.rhs()) + (bland ? 0.0 : tol)) / coef);
    }
    if (bland) bound += tol;
    Eigen::Index leaving = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double coef = tab.T(i, entering);
      if (coef <= kPivotTol || tab.T(i, tab.rhs()) / coef > bound) continue;
      const bool better =
          leaving < 0 ||
          (bland ? tab.basis[static_cast<std::size_t>(i)] < tab.basis[static_cast<std::size_t>(leaving)]
                 : coef > tab.T(leaving, entering));
      if (better) {
        leaving = i;
        best_ratio = std::max(0.0, tab.T(i, tab.rhs()) / coef);
      }
    }
    if (leaving < 0) return Outcome::unbounded;
    degenerate = best_ratio <= tol ? degenerate + 1 : 0;
    tab.pivot(leaving, entering);
    ++stale;
  }
  throw Error("simplex iteration limit reached");
}

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                  double tol) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw InvalidArgument("solve_lp: dimension mismatch");

  Tableau tab;
  tab.T = Eigen::MatrixXd::Zero(m, n + m + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    tab.T.row(i).head(n) = sign * A.row(i);
    tab.T(i, n + i) = 1.0;
    tab.T(i, n + m) = sign * b(i);
    tab.basis[static_cast<std::size_t>(i)] = static_cast<int>(n + i);
  }
  tab.source = tab.T;

  // Phase 1: minimize the sum of artificials.
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  iterate(tab, phase1, n + m, tol);

  LpResult result;
  double infeasibility = 0.0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tab.T.rows(); ++i) {
    const int col = tab.basis[static_cast<std::size_t>(i)];
    if (col >= n) {
      const double level = tab.T(i, tab.rhs());
      infeasibility += level;
      if (level > worst) {
        worst = level;
        result.violated_row = col - static_cast<int>(n);
      }
    }
  }
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  result.infeasibility = infeasibility;
  if (infeasibility > 1e-9 * scale) {
    result.status = LpStatus::infeasible;
    return result;
  }
  result.violated_row = -1;

  // Drive zero-level artificials out of the basis; rows where that is
  // impossible are linear combinations of the others.
  for (Eigen::Index i = 0; i < tab.T.rows();) {
    if (tab.basis[static_cast<std::size_t>(i)] < n) {
      ++i;
      continue;
    }
    Eigen::Index col = -1;
    const double largest = tab.T.row(i).head(n).cwiseAbs().maxCoeff(&col);
    if (largest > 1e-7) {
      tab.pivot(i, col);
      ++i;
    } else {
      tab.drop_row(i);
    }
  }

  // Phase 2 over the structural columns only.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  if (iterate(tab, phase2, n, tol) == Outcome::unbounded) {
    result.status = LpStatus::unbounded;
    return result;
  }

  result.status = LpStatus::optimal;
  result.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < tab.T.rows(); ++i) {
    const int col = tab.basis[static_cast<std::size_t>(i)];
    if (col < n) result.x(col) = tab.T(i, tab.rhs());
  }
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace pdnac
