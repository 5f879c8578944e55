#pragma once

#include <vector>

#include "margop/mdp.hpp"
#include "margop/simplex.hpp"

namespace margop {

// min (1-gamma)^{-1} R^T d  s.t. (1-gamma) delta_start + gamma (P^pi)^T d - d = 0, d free.
// Variables are the n_pairs entries of d.
LpProblem build_dual_lp(const TabularMdp& mdp, const Policy& target, SaPair start);

// min Q_t(start) + (1-gamma)^{-1} d^T (R + gamma P^pi Q_t - Q_t)
// s.t. |(1-gamma) delta_start + gamma (P^pi)^T d - d| <= (1-gamma) u, 1^T u <= eta, u >= 0.
// Variables are [d (free, n_pairs), u (n_pairs)].
LpProblem build_relaxed_lp(const TabularMdp& mdp, const Policy& target, const QFunction& q_t, SaPair start,
                           double eta);

// [Q_0, ..., Q_n]; Q_{t+1}(x,a) is the optimal value of the relaxed LP at (x,a).
// Throws std::runtime_error naming the pair if any LP is not solved to optimality.
std::vector<QFunction> lp_iterate(const TabularMdp& mdp, const Policy& target, const QFunction& q0, double eta,
                                  int n_iterations, const SimplexOptions& options = {});

// w* = d* / d^mu_start using the first n_pairs entries of the solution. Throws
// if d* is nonzero (beyond 1e-10) where d^mu vanishes, or if not optimal.
Vec extract_weights_from_lp(const LpSolution& solution, const TabularMdp& mdp, const Policy& behavior,
                            SaPair start);

}  // namespace margop
