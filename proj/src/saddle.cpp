#include "margop/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/operators.hpp"
#include "margop/simd/kernels.hpp"

namespace margop {
namespace {

void check_sizes(const TabularMdp& mdp, std::span<const double> c, std::span<const double> w_row) {
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  if (c.size() != n) throw std::invalid_argument("trace vector has wrong size");
  if (w_row.size() != n) throw std::invalid_argument("weight row has wrong size");
}

// (1-gamma) e_start + gamma T^T d - d
Vec residual_of(const Matrix& t, std::span<const double> d, double g, int start) {
  Vec b = matvec_transposed(t, d);
  simd::scale(g, b);
  simd::axpy(-1.0, d, b);
  b[start] += 1.0 - g;
  return b;
}

void check_sub_stochastic(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c) {
  for (int x = 0; x < mdp.n_states(); ++x) {
    double s = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) s += behavior(x, a) * c[mdp.index(x, a)];
    if (s > 1.0 + 1e-12) {
      throw std::invalid_argument("mu*c is not a sub-probability at state " + std::to_string(x) +
                                  " (sum " + std::to_string(s) + ")");
    }
  }
}

}  // namespace

Vec saddle_residual(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                    std::span<const double> w_row, SaPair start) {
  check_sizes(mdp, c, w_row);
  Vec d = discounted_visitation(mdp, behavior, start).probs;
  for (std::size_t j = 0; j < d.size(); ++j) d[j] *= w_row[j];
  return residual_of(joint_transition_matrix(mdp, behavior, c), d, mdp.discount(), mdp.index(start));
}

double saddle_loss(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                   std::span<const double> w_row, std::span<const double> q, SaPair start) {
  if (q.size() != static_cast<std::size_t>(mdp.n_pairs())) throw std::invalid_argument("critic has wrong size");
  return simd::dot(q, saddle_residual(mdp, behavior, c, w_row, start));
}

double max_box_loss(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                    std::span<const double> w_row, SaPair start) {
  return l1_norm(saddle_residual(mdp, behavior, c, w_row, start));
}

double contraction_bound_via_box_critic(const TabularMdp& mdp, const Policy& target,
                                        const Policy& behavior, std::span<const double> w_row,
                                        SaPair start) {
  Vec c = materialize_traces(ImportanceSampling{}, target, behavior);
  return max_box_loss(mdp, behavior, c, w_row, start) / (1.0 - mdp.discount());
}

Vec probe_critic(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c, SaPair probe) {
  mdp.check_pair(probe);
  if (c.size() != static_cast<std::size_t>(mdp.n_pairs())) throw std::invalid_argument("trace vector has wrong size");
  Matrix t = joint_transition_matrix(mdp, behavior, c);
  check_series_convergence(t, mdp.discount(), "probe_critic");
  Vec e(mdp.n_pairs(), 0.0);
  e[mdp.index(probe)] = 1.0;
  return LuDecomposition(identity_minus(t, mdp.discount())).solve(e);
}

SaddleState gda_estimate_weights(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                                 SaPair start, const GdaOptions& options) {
  mdp.check_pair(start);
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  if (c.size() != n) throw std::invalid_argument("gda_estimate_weights: trace vector has wrong size");
  if (!(options.lr_w > 0.0 && options.lr_q > 0.0)) {
    throw std::invalid_argument("gda_estimate_weights: learning rates must be positive");
  }
  if (options.n_steps < 0) throw std::invalid_argument("gda_estimate_weights: n_steps must be >= 0");
  if (!options.initial_w.empty() && options.initial_w.size() != n) {
    throw std::invalid_argument("gda_estimate_weights: initial_w has wrong size");
  }
  const double g = mdp.discount();
  const int s = mdp.index(start);
  const Matrix t = joint_transition_matrix(mdp, behavior, c);
  const Vec dmu = discounted_visitation(mdp, behavior, start).probs;
  std::vector<char> support(n);
  for (std::size_t j = 0; j < n; ++j) support[j] = dmu[j] > kZeroVisitation;

  Vec d(n, 0.0);
  if (!options.initial_w.empty()) {
    for (std::size_t j = 0; j < n; ++j) d[j] = support[j] ? options.initial_w[j] * dmu[j] : 0.0;
  }
  Vec q(n, 0.0);

  // Gradient of q^T b(d) in d is (gamma T - I) q, restricted to the support.
  auto grad_d = [&](const Vec& qv) {
    Vec gd = matvec(t, qv);
    simd::scale(g, gd);
    simd::axpy(-1.0, qv, gd);
    for (std::size_t j = 0; j < n; ++j) {
      if (!support[j]) gd[j] = 0.0;
    }
    return gd;
  };
  auto project = [](Vec& v) {
    for (double& x : v) x = std::clamp(x, -1.0, 1.0);
  };

  SaddleState st;
  for (int k = 0; k < options.n_steps; ++k) {
    // Extrapolation from the current point.
    Vec b0 = residual_of(t, d, g, s);
    Vec gd0 = grad_d(q);
    Vec d_half = d;
    simd::axpy(-options.lr_w, gd0, d_half);
    Vec q_half = q;
    simd::axpy(options.lr_q, b0, q_half);
    project(q_half);
    // Update with gradients at the extrapolated point.
    Vec b1 = residual_of(t, d_half, g, s);
    Vec gd1 = grad_d(q_half);
    simd::axpy(-options.lr_w, gd1, d);
    simd::axpy(options.lr_q, b1, q);
    project(q);
    double box = l1_norm(b1);
    if (!std::isfinite(box) || box > 1e3) {
      throw std::runtime_error("gda_estimate_weights: loss diverged at step " + std::to_string(k) +
                               "; try smaller learning rates");
    }
  }
  Vec b = residual_of(t, d, g, s);
  st.step = options.n_steps;
  st.loss = simd::dot(q, b);
  st.box_loss = l1_norm(b);
  if (!std::isfinite(st.box_loss) || st.box_loss > 1e3) {
    throw std::runtime_error("gda_estimate_weights: loss diverged; try smaller learning rates");
  }
  st.w.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (support[j]) st.w[j] = d[j] / dmu[j];
  }
  st.q = std::move(q);
  return st;
}

TabularMdp empirical_mdp(std::span<const Trajectory> replay, const TabularMdp& like) {
  const int S = like.n_states();
  const int A = like.n_actions();
  const std::size_t n = static_cast<std::size_t>(like.n_pairs());
  Vec counts(n * S, 0.0);
  Vec reward_sum(n, 0.0), visits(n, 0.0);
  for (const Trajectory& traj : replay) {
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const Step& st = traj.steps[t];
      if (like.is_terminal(st.state)) continue;
      const int i = like.index(st.state, st.action);
      counts[static_cast<std::size_t>(i) * S + traj.state_after(t)] += 1.0;
      reward_sum[i] += st.reward;
      visits[i] += 1.0;
    }
  }
  Vec p(n * S, 0.0), r(n, 0.0), sd(n, 0.0);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < A; ++a) {
      const int i = like.index(x, a);
      auto row = std::span<double>(p).subspan(static_cast<std::size_t>(i) * S, S);
      if (visits[i] == 0.0 || like.is_terminal(x)) {
        row[x] = 1.0;
        continue;
      }
      for (int y = 0; y < S; ++y) row[y] = counts[static_cast<std::size_t>(i) * S + y] / visits[i];
      r[i] = reward_sum[i] / visits[i];
    }
  }
  return TabularMdp(S, A, std::move(p), std::move(r), std::move(sd), like.discount(), like.terminal_states());
}

double fenchel_dual_objective(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                              SaPair start, std::span<const double> v, std::span<const double> psi) {
  check_sizes(mdp, c, v);
  check_sizes(mdp, c, psi);
  check_sub_stochastic(mdp, behavior, c);
  const double g = mdp.discount();
  const Matrix t = joint_transition_matrix(mdp, behavior, c);
  const Vec d = discounted_visitation(mdp, behavior, start).probs;
  Vec u = matvec(t, v);
  simd::scale(-g, u);
  simd::axpy(1.0, v, u);
  double j = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) j += d[i] * (psi[i] * u[i] - 0.5 * psi[i] * psi[i]);
  return j - (1.0 - g) * v[mdp.index(start)];
}

namespace {

struct FenchelModel {
  Matrix t;
  Vec d;
  double g;
  int s;

  FenchelGradient gradient(std::span<const double> v, std::span<const double> psi) const {
    const std::size_t n = d.size();
    Vec u = matvec(t, v);
    simd::scale(-g, u);
    simd::axpy(1.0, v, u);
    FenchelGradient out{Vec(n), Vec(n)};
    Vec dpsi(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.psi[i] = d[i] * (u[i] - psi[i]);
      dpsi[i] = d[i] * psi[i];
    }
    out.v = matvec_transposed(t, dpsi);
    simd::scale(-g, out.v);
    simd::axpy(1.0, dpsi, out.v);
    out.v[s] -= 1.0 - g;
    return out;
  }
};

FenchelModel fenchel_model(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                           SaPair start) {
  mdp.check_pair(start);
  if (c.size() != static_cast<std::size_t>(mdp.n_pairs())) throw std::invalid_argument("trace vector has wrong size");
  check_sub_stochastic(mdp, behavior, c);
  return {joint_transition_matrix(mdp, behavior, c), discounted_visitation(mdp, behavior, start).probs,
          mdp.discount(), mdp.index(start)};
}

}  // namespace

FenchelGradient fenchel_dual_gradient(const TabularMdp& mdp, const Policy& behavior,
                                      std::span<const double> c, SaPair start,
                                      std::span<const double> v, std::span<const double> psi) {
  check_sizes(mdp, c, v);
  check_sizes(mdp, c, psi);
  return fenchel_model(mdp, behavior, c, start).gradient(v, psi);
}

FenchelState fenchel_descent_ascent(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c,
                                    SaPair start, const FenchelOptions& options) {
  if (!(options.lr_v > 0.0 && options.lr_psi > 0.0)) {
    throw std::invalid_argument("fenchel_descent_ascent: learning rates must be positive");
  }
  FenchelModel model = fenchel_model(mdp, behavior, c, start);
  const std::size_t n = model.d.size();
  FenchelState st{Vec(n, 0.0), Vec(n, 0.0), 0, 0.0};
  for (int k = 0; k < options.n_steps; ++k) {
    FenchelGradient grad = model.gradient(st.v, st.psi);
    simd::axpy(-options.lr_v, grad.v, st.v);
    simd::axpy(options.lr_psi, grad.psi, st.psi);
  }
  st.step = options.n_steps;
  st.objective = fenchel_dual_objective(mdp, behavior, c, start, st.v, st.psi);
  if (!std::isfinite(st.objective)) {
    throw std::runtime_error("fenchel_descent_ascent: iterates diverged; try smaller learning rates");
  }
  return st;
}

}  // namespace margop
