#include "margop/lp_eval.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/operators.hpp"

namespace margop {
namespace {

// Row j of (gamma (P^pi)^T - I): coefficients of the balance residual at j.
Matrix balance_matrix(const TabularMdp& mdp, const Policy& target) {
  Matrix m = joint_transition_matrix(mdp, target).transposed();
  for (double& v : m.data()) v *= mdp.discount();
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
  return m;
}

}  // namespace

LpProblem build_dual_lp(const TabularMdp& mdp, const Policy& target, SaPair start) {
  mdp.check_pair(start);
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  const double g = mdp.discount();
  LpProblem lp;
  lp.objective = mdp.mean_rewards();
  for (double& v : lp.objective) v /= 1.0 - g;
  // (gamma P^T - I) d = -(1-gamma) delta_start
  lp.eq_lhs = balance_matrix(mdp, target);
  lp.eq_rhs.assign(n, 0.0);
  lp.eq_rhs[mdp.index(start)] = -(1.0 - g);
  lp.ub_lhs = Matrix(0, n);
  lp.bounds.assign(n, VariableBounds{-kInf, kInf});
  return lp;
}

LpProblem build_relaxed_lp(const TabularMdp& mdp, const Policy& target, const QFunction& q_t, SaPair start,
                           double eta) {
  mdp.check_pair(start);
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("build_relaxed_lp: eta must lie in [0,1)");
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  const double g = mdp.discount();
  const std::size_t s = static_cast<std::size_t>(mdp.index(start));
  const Matrix bal = balance_matrix(mdp, target);
  const Vec delta = bellman_error_vector(mdp, target, q_t);

  LpProblem lp;
  lp.objective.assign(2 * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) lp.objective[j] = delta[j] / (1.0 - g);
  lp.objective_offset = q_t[static_cast<int>(s)];
  lp.eq_lhs = Matrix(0, 2 * n);
  lp.ub_lhs = Matrix(2 * n + 1, 2 * n);
  lp.ub_rhs.assign(2 * n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    //  bal d - (1-gamma) u <= -(1-gamma) delta_start
    // -bal d - (1-gamma) u <=  (1-gamma) delta_start
    for (std::size_t k = 0; k < n; ++k) {
      lp.ub_lhs(j, k) = bal(j, k);
      lp.ub_lhs(n + j, k) = -bal(j, k);
    }
    lp.ub_lhs(j, n + j) = -(1.0 - g);
    lp.ub_lhs(n + j, n + j) = -(1.0 - g);
    const double e = j == s ? 1.0 - g : 0.0;
    lp.ub_rhs[j] = -e;
    lp.ub_rhs[n + j] = e;
    lp.ub_lhs(2 * n, n + j) = 1.0;
  }
  lp.ub_rhs[2 * n] = eta;
  lp.bounds.assign(2 * n, VariableBounds{});
  for (std::size_t j = 0; j < n; ++j) lp.bounds[j] = {-kInf, kInf};
  return lp;
}

std::vector<QFunction> lp_iterate(const TabularMdp& mdp, const Policy& target, const QFunction& q0, double eta,
                                  int n_iterations, const SimplexOptions& options) {
  check_compatible(mdp, q0);
  if (n_iterations < 0) throw std::invalid_argument("lp_iterate: n_iterations must be >= 0");
  std::vector<QFunction> seq{q0};
  seq.reserve(static_cast<std::size_t>(n_iterations) + 1);
  for (int it = 0; it < n_iterations; ++it) {
    const QFunction& cur = seq.back();
    QFunction next = QFunction::zeros(mdp.n_states(), mdp.n_actions());
    for (int i = 0; i < mdp.n_pairs(); ++i) {
      const SaPair p = mdp.pair(i);
      LpSolution sol = simplex_solve(build_relaxed_lp(mdp, target, cur, p, eta), options);
      if (sol.status != LpStatus::kOptimal) {
        throw std::runtime_error("lp_iterate: relaxed LP at (" + std::to_string(p.state) + "," +
                                 std::to_string(p.action) + ") iteration " + std::to_string(it) + " is " +
                                 to_string(sol.status));
      }
      next[i] = sol.objective_value;
    }
    seq.push_back(std::move(next));
  }
  return seq;
}

Vec extract_weights_from_lp(const LpSolution& solution, const TabularMdp& mdp, const Policy& behavior,
                            SaPair start) {
  if (solution.status != LpStatus::kOptimal) {
    throw std::invalid_argument("extract_weights_from_lp: solution is not optimal");
  }
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  if (solution.values.size() < n) throw std::invalid_argument("extract_weights_from_lp: solution too short");
  const Vec dmu = discounted_visitation(mdp, behavior, start).probs;
  Vec w(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double d = solution.values[j];
    if (dmu[j] > kZeroVisitation) {
      w[j] = d / dmu[j];
    } else if (std::fabs(d) > 1e-10) {
      const SaPair p = mdp.pair(static_cast<int>(j));
      throw std::runtime_error("extract_weights_from_lp: LP puts mass " + std::to_string(d) + " on (" +
                               std::to_string(p.state) + "," + std::to_string(p.action) +
                               "), which the behavior policy never visits");
    }
  }
  return w;
}

}  // namespace margop
