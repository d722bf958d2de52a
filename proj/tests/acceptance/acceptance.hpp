#pragma once

#include <functional>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

namespace pdnac::acceptance {

struct CriterionResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Criterion {
  std::string name;
  std::function<CriterionResult()> check;
};

/// Every acceptance criterion, in report order.
const std::vector<Criterion>& criteria();

CriterionResult gradcheck();
CriterionResult oracle_bellman();
CriterionResult lp_cross_check();
CriterionResult mlmc_identity();
CriterionResult critic_convergence();
CriterionResult npg_estimator();
CriterionResult end_to_end_trend();
CriterionResult hard_invariants();

/// Runs the criteria whose name contains `filter` (all when empty), printing
/// one "PASS name: detail" or "FAIL name: detail" line each. Returns the
/// number of failures.
int run_criteria(const std::string& filter = "", std::ostream& out = std::cout);

}  // namespace pdnac::acceptance
