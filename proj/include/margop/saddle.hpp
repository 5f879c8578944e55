#pragma once

#include <span>
#include <vector>

#include "margop/linalg/matrix.hpp"
#include "margop/mdp.hpp"

namespace margop {

// b(w) = (1-gamma) delta_start + gamma (P^{c mu})^T d_w - d_w with d_w = w ⊙ d^mu_start.
// The saddle loss is the inner product q^T b(w).
Vec saddle_residual(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                    std::span<const double> w_row, SaPair start);

double saddle_loss(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                   std::span<const double> w_row, std::span<const double> q, SaPair start);

// max over q in [-1,1]^n of the loss, i.e. ||b(w)||_1, attained at q = sign(b).
double max_box_loss(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                    std::span<const double> w_row, SaPair start);

// Box-maximised loss with c = pi/mu, divided by (1-gamma): the local
// contraction rate of the marginalized operator with this weight row.
double contraction_bound_via_box_critic(const TabularMdp& mdp, const Policy& target,
                                        const Policy& behavior, std::span<const double> w_row,
                                        SaPair start);

// Column `probe` of (I - gamma P^{c mu})^{-1}. With this critic,
// L(q, w) = (w^c - w)(probe) * d^mu(probe).
Vec probe_critic(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c, SaPair probe);

struct SaddleState {
  Vec w;                  // weight row
  Vec q;                  // critic in [-1,1]^n
  int step = 0;
  double loss = 0.0;      // L(q, w) at the returned iterate
  double box_loss = 0.0;  // max over the box, ||b(w)||_1
};

struct GdaOptions {
  double lr_w = 0.5;
  double lr_q = 0.5;
  int n_steps = 10000;
  Vec initial_w;  // empty means zeros
};

// Extragradient descent in d = w ⊙ d^mu and projected ascent on q in the box,
// with exact population gradients. Throws std::runtime_error if the loss
// exceeds 1e3.
SaddleState gda_estimate_weights(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                                 SaPair start, const GdaOptions& options);

// Plug-in MDP built from transition counts in stored trajectories; pairs with
// no data self-loop. Rewards are the sample means.
TabularMdp empirical_mdp(std::span<const Trajectory> replay, const TabularMdp& like);

// ---- convex dual objective for a weight row ----

// J(v, psi) = sum_i d_i [psi_i ((I - gamma T) v)_i - psi_i^2 / 2] - (1-gamma) v(start),
// d = d^mu_start, T = P^{c mu}. Throws unless mu*c is sub-stochastic per state.
double fenchel_dual_objective(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                              SaPair start, std::span<const double> v, std::span<const double> psi);

struct FenchelGradient {
  Vec v;
  Vec psi;
};

FenchelGradient fenchel_dual_gradient(const TabularMdp& mdp, const Policy& behavior,
                                      std::span<const double> c, SaPair start,
                                      std::span<const double> v, std::span<const double> psi);

struct FenchelOptions {
  double lr_v = 0.5;
  double lr_psi = 0.5;
  int n_steps = 100000;
};

struct FenchelState {
  Vec v;
  Vec psi;
  int step = 0;
  double objective = 0.0;
};

// Simultaneous gradient descent in v and ascent in psi from zero.
FenchelState fenchel_descent_ascent(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                                    SaPair start, const FenchelOptions& options);

}  // namespace margop
