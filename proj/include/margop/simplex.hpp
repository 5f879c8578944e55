#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "margop/linalg/matrix.hpp"

namespace margop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct VariableBounds {
  double lower = 0.0;
  double upper = kInf;
};

// minimize objective^T x + objective_offset
// subject to eq_lhs x = eq_rhs, ub_lhs x <= ub_rhs, lower <= x <= upper.
// Empty constraint matrices must still have n_variables columns (or zero
// rows and zero columns). Empty bounds means every variable is >= 0.
struct LpProblem {
  Vec objective;
  double objective_offset = 0.0;
  Matrix eq_lhs;
  Vec eq_rhs;
  Matrix ub_lhs;
  Vec ub_rhs;
  std::vector<VariableBounds> bounds;

  std::size_t n_variables() const noexcept { return objective.size(); }
  void validate() const;  // throws std::invalid_argument
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

const char* to_string(LpStatus status) noexcept;

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Vec values;
  double objective_value = 0.0;
  int iterations = 0;
};

struct SimplexOptions {
  double pivot_tolerance = 1e-10;
  int max_iterations = 50000;
};

// Two-phase dense tableau simplex with Bland's rule. The final basic solution
// is recomputed from the original standard-form columns with an LU solve.
// Throws std::runtime_error when max_iterations is exceeded.
LpSolution simplex_solve(const LpProblem& problem, const SimplexOptions& options = {});

}  // namespace margop
