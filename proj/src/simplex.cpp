#include "margop/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop {
namespace {

struct Term {
  std::size_t column;
  double coef;
};

// x_j = shift_j + sum coef * y_column over nonnegative standard-form columns.
struct VariableMap {
  std::vector<std::vector<Term>> terms;
  Vec shift;
  std::size_t n_columns = 0;
};

struct StandardForm {
  Matrix a;  // m x n_struct
  Vec b;     // >= 0 after sign fixing
  std::vector<long> initial_slack;  // column usable as initial basis for row i, or -1
  VariableMap map;
};

StandardForm to_standard_form(const LpProblem& p) {
  const std::size_t n = p.n_variables();
  StandardForm sf;
  VariableMap& map = sf.map;
  map.terms.resize(n);
  map.shift.assign(n, 0.0);
  struct BoundRow {
    std::size_t column;
    double limit;
  };
  std::vector<BoundRow> bound_rows;
  for (std::size_t j = 0; j < n; ++j) {
    VariableBounds b = p.bounds.empty() ? VariableBounds{} : p.bounds[j];
    if (std::isfinite(b.lower)) {
      map.shift[j] = b.lower;
      map.terms[j].push_back({map.n_columns, 1.0});
      if (std::isfinite(b.upper)) bound_rows.push_back({map.n_columns, b.upper - b.lower});
      ++map.n_columns;
    } else if (std::isfinite(b.upper)) {
      map.shift[j] = b.upper;
      map.terms[j].push_back({map.n_columns++, -1.0});
    } else {
      map.terms[j].push_back({map.n_columns++, 1.0});
      map.terms[j].push_back({map.n_columns++, -1.0});
    }
  }
  const std::size_t m_eq = p.eq_lhs.rows();
  const std::size_t m_ub = p.ub_lhs.rows() + bound_rows.size();
  const std::size_t m = m_eq + m_ub;
  const std::size_t n_struct = map.n_columns + m_ub;
  sf.a = Matrix(m, n_struct);
  sf.b.assign(m, 0.0);
  sf.initial_slack.assign(m, -1);

  auto emit_row = [&](std::size_t r, std::span<const double> coeffs, double rhs) {
    double shifted = rhs;
    for (std::size_t j = 0; j < n; ++j) {
      if (coeffs[j] == 0.0) continue;
      shifted -= coeffs[j] * map.shift[j];
      for (const Term& t : map.terms[j]) sf.a(r, t.column) += coeffs[j] * t.coef;
    }
    sf.b[r] = shifted;
  };
  std::size_t r = 0;
  for (std::size_t i = 0; i < m_eq; ++i, ++r) emit_row(r, p.eq_lhs.row(i), p.eq_rhs[i]);
  std::size_t slack = map.n_columns;
  for (std::size_t i = 0; i < p.ub_lhs.rows(); ++i, ++r, ++slack) {
    emit_row(r, p.ub_lhs.row(i), p.ub_rhs[i]);
    sf.a(r, slack) = 1.0;
    sf.initial_slack[r] = static_cast<long>(slack);
  }
  for (const BoundRow& br : bound_rows) {
    sf.a(r, br.column) = 1.0;
    sf.a(r, slack) = 1.0;
    sf.b[r] = br.limit;
    sf.initial_slack[r] = static_cast<long>(slack);
    ++r;
    ++slack;
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (sf.b[i] < 0.0) {
      simd::scale(-1.0, sf.a.row(i));
      sf.b[i] = -sf.b[i];
      sf.initial_slack[i] = -1;
    }
  }
  return sf;
}

class Tableau {
 public:
  Tableau(const StandardForm& sf, double tol, int max_iterations)
      : tol_(tol), max_iterations_(max_iterations) {
    m_ = sf.a.rows();
    n_struct_ = sf.a.cols();
    std::size_t n_art = 0;
    for (long s : sf.initial_slack) n_art += s < 0 ? 1 : 0;
    n_total_ = n_struct_ + n_art;
    t_ = Matrix(m_, n_total_ + 1);
    basis_.assign(m_, 0);
    std::size_t art = n_struct_;
    for (std::size_t i = 0; i < m_; ++i) {
      std::copy(sf.a.row(i).begin(), sf.a.row(i).end(), t_.row(i).begin());
      t_(i, n_total_) = sf.b[i];
      if (sf.initial_slack[i] >= 0) {
        basis_[i] = static_cast<std::size_t>(sf.initial_slack[i]);
      } else {
        t_(i, art) = 1.0;
        basis_[i] = art++;
      }
    }
    allowed_.assign(n_total_, 1);
  }

  bool is_artificial(std::size_t j) const { return j >= n_struct_; }

  // Returns false if unbounded.
  bool optimize(const Vec& cost) {
    reduced_.assign(n_total_ + 1, 0.0);
    for (std::size_t j = 0; j < n_total_; ++j) reduced_[j] = cost[j];
    for (std::size_t i = 0; i < m_; ++i) {
      double cb = cost[basis_[i]];
      if (cb != 0.0) simd::axpy(-cb, t_.row(i), reduced_);
    }
    while (true) {
      std::size_t enter = n_total_;
      for (std::size_t j = 0; j < n_total_; ++j) {
        if (allowed_[j] && reduced_[j] < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter == n_total_) return true;
      std::size_t leave = m_;
      double best = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        double a = t_(i, enter);
        if (a <= tol_) continue;
        double ratio = std::max(0.0, t_(i, n_total_)) / a;
        if (leave == m_ || ratio < best - 1e-12) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-12 && basis_[i] < basis_[leave]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave == m_) return false;
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    if (++iterations_ > max_iterations_) {
      throw std::runtime_error("simplex_solve: iteration limit " + std::to_string(max_iterations_) +
                               " exceeded (cycling guard)");
    }
    auto pr = t_.row(row);
    simd::scale(1.0 / pr[col], pr);
    pr[col] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row) continue;
      double f = t_(i, col);
      if (f != 0.0) {
        simd::axpy(-f, pr, t_.row(i));
        t_(i, col) = 0.0;
      }
    }
    if (!reduced_.empty()) {
      double f = reduced_[col];
      if (f != 0.0) {
        simd::axpy(-f, pr, reduced_);
        reduced_[col] = 0.0;
      }
    }
    basis_[row] = col;
  }

  // Pivots artificial variables out of the basis; drops rows that are
  // redundant (no structural column has a usable entry).
  void drive_out_artificials() {
    for (std::size_t i = 0; i < m_;) {
      if (!is_artificial(basis_[i])) {
        ++i;
        continue;
      }
      std::size_t col = n_struct_;
      double best = tol_;
      for (std::size_t j = 0; j < n_struct_; ++j) {
        if (std::fabs(t_(i, j)) > best) {
          best = std::fabs(t_(i, j));
          col = j;
        }
      }
      if (col < n_struct_) {
        pivot(i, col);
        ++i;
      } else {
        remove_row(i);
      }
    }
    for (std::size_t j = n_struct_; j < n_total_; ++j) allowed_[j] = 0;
  }

  void remove_row(std::size_t i) {
    Matrix t(m_ - 1, n_total_ + 1);
    for (std::size_t r = 0, k = 0; r < m_; ++r) {
      if (r == i) continue;
      std::copy(t_.row(r).begin(), t_.row(r).end(), t.row(k++).begin());
    }
    t_ = std::move(t);
    basis_.erase(basis_.begin() + static_cast<long>(i));
    --m_;
  }

  double objective(const Vec& cost) const {
    double v = 0.0;
    for (std::size_t i = 0; i < m_; ++i) v += cost[basis_[i]] * t_(i, n_total_);
    return v;
  }

  std::size_t rows() const { return m_; }
  std::size_t n_total() const { return n_total_; }
  const std::vector<std::size_t>& basis() const { return basis_; }
  double rhs(std::size_t i) const { return t_(i, n_total_); }
  int iterations() const { return iterations_; }

 private:
  double tol_;
  int max_iterations_;
  int iterations_ = 0;
  std::size_t m_ = 0;
  std::size_t n_struct_ = 0;
  std::size_t n_total_ = 0;
  Matrix t_;
  std::vector<std::size_t> basis_;
  std::vector<char> allowed_;
  Vec reduced_;
};

// Recomputes basic values from the original columns; falls back to the
// tableau values if the basis matrix is numerically singular.
Vec basic_solution(const StandardForm& sf, const Tableau& tab) {
  Vec y(sf.a.cols(), 0.0);
  const auto& basis = tab.basis();
  const std::size_t m = basis.size();
  for (std::size_t i = 0; i < m; ++i) y[basis[i]] = std::max(0.0, tab.rhs(i));
  if (m == 0 || m != sf.a.rows()) return y;
  Matrix bm(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k) bm(i, k) = sf.a(i, basis[k]);
  try {
    Vec xb = LuDecomposition(std::move(bm)).solve(sf.b);
    for (std::size_t k = 0; k < m; ++k) y[basis[k]] = xb[k];
  } catch (const std::runtime_error&) {
  }
  return y;
}

}  // namespace

const char* to_string(LpStatus status) noexcept {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

void LpProblem::validate() const {
  const std::size_t n = n_variables();
  auto check_block = [&](const Matrix& a, const Vec& b, const char* name) {
    if (a.rows() != b.size()) throw std::invalid_argument(std::string("LpProblem: ") + name + " row count mismatch");
    if (a.rows() > 0 && a.cols() != n) {
      throw std::invalid_argument(std::string("LpProblem: ") + name + " has wrong column count");
    }
    for (double v : a.data()) {
      if (!std::isfinite(v)) throw std::invalid_argument(std::string("LpProblem: non-finite entry in ") + name);
    }
    for (double v : b) {
      if (!std::isfinite(v)) throw std::invalid_argument(std::string("LpProblem: non-finite rhs in ") + name);
    }
  };
  check_block(eq_lhs, eq_rhs, "equality constraints");
  check_block(ub_lhs, ub_rhs, "inequality constraints");
  for (double v : objective) {
    if (!std::isfinite(v)) throw std::invalid_argument("LpProblem: non-finite objective coefficient");
  }
  if (!std::isfinite(objective_offset)) throw std::invalid_argument("LpProblem: non-finite objective offset");
  if (!bounds.empty() && bounds.size() != n) throw std::invalid_argument("LpProblem: bounds size mismatch");
  for (const VariableBounds& b : bounds) {
    if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper || b.lower == kInf ||
        b.upper == -kInf) {
      throw std::invalid_argument("LpProblem: invalid variable bounds");
    }
  }
}

LpSolution simplex_solve(const LpProblem& problem, const SimplexOptions& options) {
  problem.validate();
  const StandardForm sf = to_standard_form(problem);
  Tableau tab(sf, options.pivot_tolerance, options.max_iterations);

  LpSolution sol;
  Vec phase1(tab.n_total(), 0.0);
  for (std::size_t j = 0; j < tab.n_total(); ++j) phase1[j] = tab.is_artificial(j) ? 1.0 : 0.0;
  tab.optimize(phase1);
  double bscale = 1.0;
  for (double v : sf.b) bscale = std::max(bscale, std::fabs(v));
  if (tab.objective(phase1) > 1e-9 * bscale) {
    sol.status = LpStatus::kInfeasible;
    sol.iterations = tab.iterations();
    return sol;
  }
  tab.drive_out_artificials();

  Vec cost(tab.n_total(), 0.0);
  for (std::size_t j = 0; j < problem.n_variables(); ++j) {
    for (const Term& t : sf.map.terms[j]) cost[t.column] += problem.objective[j] * t.coef;
  }
  const bool bounded = tab.optimize(cost);
  sol.iterations = tab.iterations();
  if (!bounded) {
    sol.status = LpStatus::kUnbounded;
    return sol;
  }
  Vec y = basic_solution(sf, tab);
  sol.values.assign(problem.n_variables(), 0.0);
  for (std::size_t j = 0; j < problem.n_variables(); ++j) {
    double x = sf.map.shift[j];
    for (const Term& t : sf.map.terms[j]) x += t.coef * y[t.column];
    sol.values[j] = x;
  }
  sol.status = LpStatus::kOptimal;
  sol.objective_value = problem.objective_offset + simd::dot(problem.objective, sol.values);
  return sol;
}

}  // namespace margop
