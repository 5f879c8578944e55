#include "margop/operators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string pair_str(SaPair p) {
  return "(" + std::to_string(p.state) + "," + std::to_string(p.action) + ")";
}

void check_finite_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + ": matrix must be square");
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

void check_trace_size(const TabularMdp& mdp, std::span<const double> c) {
  if (c.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("trace vector has " + std::to_string(c.size()) + " entries, expected " +
                                std::to_string(mdp.n_pairs()));
  }
}

// (I - gamma P)^{-1} after the convergence gate.
Matrix resolvent(const Matrix& p, double discount, const char* what) {
  check_series_convergence(p, discount, what);
  return LuDecomposition(identity_minus(p, discount)).inverse();
}

// Divides numerator by the behaviour resolvent where visitation is positive.
Matrix ratio_of_resolvents(const Matrix& num, const Matrix& den, double discount) {
  Matrix w(num.rows(), num.cols());
  for (std::size_t i = 0; i < num.rows(); ++i) {
    for (std::size_t j = 0; j < num.cols(); ++j) {
      double b = den(i, j);
      if ((1.0 - discount) * b > kZeroVisitation) w(i, j) = num(i, j) / b;
    }
  }
  return w;
}

ResidualReport residual_from_parts(const TabularMdp& mdp, const Matrix& p_target,
                                   std::span<const double> dmu_row, std::span<const double> w_row,
                                   SaPair start) {
  const double g = mdp.discount();
  const std::size_t n = dmu_row.size();
  if (w_row.size() != n) throw std::invalid_argument("weight row has wrong size");
  Vec dw(n);
  for (std::size_t j = 0; j < n; ++j) dw[j] = w_row[j] * dmu_row[j];
  Vec e = matvec_transposed(p_target, dw);
  simd::scale(g, e);
  simd::axpy(-1.0, dw, e);
  e[mdp.index(start)] += 1.0 - g;
  ResidualReport r;
  r.start = start;
  r.local_rate = l1_norm(e) / (1.0 - g);
  r.contractive = r.local_rate < 1.0;
  r.residual = {start, std::move(e)};
  return r;
}

}  // namespace

std::string describe(const TraceScheme& scheme) {
  return std::visit(Overloaded{
                        [](const OneStep&) { return std::string("one_step"); },
                        [](const ImportanceSampling&) { return std::string("importance_sampling"); },
                        [](const Retrace& r) {
                          return "retrace(lambda=" + std::to_string(r.lambda) +
                                 ",cbar=" + std::to_string(r.cbar) + ")";
                        },
                        [](const TreeBackup&) { return std::string("tree_backup"); },
                        [](const QLambda& q) { return "q_lambda(" + std::to_string(q.lambda) + ")"; },
                        [](const CustomTraces&) { return std::string("custom"); },
                    },
                    scheme);
}

Vec materialize_traces(const TraceScheme& scheme, const Policy& target, const Policy& behavior) {
  if (target.n_states() != behavior.n_states() || target.n_actions() != behavior.n_actions()) {
    throw std::invalid_argument("materialize_traces: target and behavior shapes differ");
  }
  const int S = target.n_states();
  const int A = target.n_actions();
  const std::size_t n = static_cast<std::size_t>(S) * A;
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < A; ++a) {
      if (target(x, a) > 0.0 && behavior(x, a) <= 0.0) {
        throw std::invalid_argument("behavior policy does not cover target at " + pair_str({x, a}));
      }
    }
  }
  auto ratio = [&](std::size_t i) {
    double m = behavior.probs()[i];
    return m > 0.0 ? target.probs()[i] / m : 0.0;
  };
  Vec c(n, 0.0);
  std::visit(Overloaded{
                 [&](const OneStep&) {},
                 [&](const ImportanceSampling&) {
                   for (std::size_t i = 0; i < n; ++i) c[i] = ratio(i);
                 },
                 [&](const Retrace& r) {
                   if (!(r.lambda >= 0.0 && r.lambda <= 1.0)) {
                     throw std::invalid_argument("Retrace: lambda must lie in [0,1]");
                   }
                   if (!(r.cbar >= 0.0)) throw std::invalid_argument("Retrace: cbar must be >= 0");
                   for (std::size_t i = 0; i < n; ++i) c[i] = r.lambda * std::min(r.cbar, ratio(i));
                 },
                 [&](const TreeBackup&) { c = target.probs(); },
                 [&](const QLambda& q) {
                   if (!(q.lambda >= 0.0 && q.lambda <= 1.0)) {
                     throw std::invalid_argument("QLambda: lambda must lie in [0,1]");
                   }
                   std::fill(c.begin(), c.end(), q.lambda);
                 },
                 [&](const CustomTraces& t) {
                   if (t.c.size() != n) throw std::invalid_argument("CustomTraces: wrong size");
                   for (std::size_t i = 0; i < n; ++i) {
                     if (!(t.c[i] >= 0.0) || !std::isfinite(t.c[i])) {
                       throw std::invalid_argument("CustomTraces: negative or non-finite entry at flat index " +
                                                   std::to_string(i));
                     }
                   }
                   c = t.c;
                 },
             },
             scheme);
  return c;
}

std::vector<SaPair> trace_safety_violations(std::span<const double> c, const Policy& target,
                                            const Policy& behavior, double tol) {
  std::vector<SaPair> bad;
  const int A = target.n_actions();
  for (std::size_t i = 0; i < c.size(); ++i) {
    double m = behavior.probs()[i];
    if (m > 0.0 && c[i] > target.probs()[i] / m + tol) {
      bad.push_back({static_cast<int>(i) / A, static_cast<int>(i) % A});
    }
  }
  return bad;
}

TdWeights::TdWeights(Matrix m) : m_(std::move(m)) { check_finite_square(m_, "TdWeights"); }

StateTdWeights::StateTdWeights(Matrix m) : m_(std::move(m)) { check_finite_square(m_, "StateTdWeights"); }

double spectral_radius_estimate(const Matrix& a, int iterations) {
  const std::size_t n = a.rows();
  if (n == 0) return 0.0;
  if (iterations < 2) throw std::invalid_argument("spectral_radius_estimate: need at least 2 iterations");
  Vec v(n, 1.0 / static_cast<double>(n));
  double log_sum = 0.0;
  int counted = 0;
  const int tail_start = iterations / 2;
  for (int it = 0; it < iterations; ++it) {
    Vec next = matvec(a, v);
    double norm = l1_norm(next);
    if (norm == 0.0) return 0.0;
    simd::scale(1.0 / norm, next);
    if (it >= tail_start) {
      log_sum += std::log(norm);
      ++counted;
    }
    v.swap(next);
  }
  return std::exp(log_sum / counted);
}

void check_series_convergence(const Matrix& p, double discount, const char* what) {
  if (discount * max_row_abs_sum(p) < 1.0) return;
  double rho = discount * spectral_radius_estimate(p);
  if (rho >= 1.0 - 1e-9) {
    throw std::runtime_error(std::string(what) + ": trace series does not converge (spectral radius of " +
                             "gamma*P estimated at " + std::to_string(rho) + ")");
  }
}

QFunction apply_multistep(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                          std::span<const double> c, const QFunction& q) {
  check_compatible(mdp, behavior);
  check_trace_size(mdp, c);
  Matrix p = joint_transition_matrix(mdp, behavior, c);
  check_series_convergence(p, mdp.discount(), "apply_multistep");
  Vec delta = bellman_error_vector(mdp, target, q);
  Vec corr = LuDecomposition(identity_minus(p, mdp.discount())).solve(delta);
  Vec out = q.values();
  simd::axpy(1.0, corr, out);
  return QFunction(mdp.n_states(), mdp.n_actions(), std::move(out));
}

QFunction apply_marginalized(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                             const TdWeights& w, const QFunction& q) {
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  if (w.size() != n) throw std::invalid_argument("apply_marginalized: weight matrix has wrong size");
  Vec delta = bellman_error_vector(mdp, target, q);
  Matrix dmu = visitation_matrix(mdp, behavior);
  const double inv = 1.0 / (1.0 - mdp.discount());
  Vec out = q.values();
  Vec tmp(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto d = dmu.row(i);
    auto wr = w.row(i);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = d[j] * wr[j];
    out[i] += inv * simd::dot(tmp, delta);
  }
  return QFunction(mdp.n_states(), mdp.n_actions(), std::move(out));
}

double apply_marginalized_row(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                              std::span<const double> w_row, SaPair start, const QFunction& q) {
  mdp.check_pair(start);
  if (w_row.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("apply_marginalized_row: weight row has wrong size");
  }
  Vec delta = bellman_error_vector(mdp, target, q);
  Vec d = discounted_visitation(mdp, behavior, start).probs;
  for (std::size_t j = 0; j < d.size(); ++j) d[j] *= w_row[j];
  return q[mdp.index(start)] + simd::dot(d, delta) / (1.0 - mdp.discount());
}

TdWeights trace_to_weights(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c) {
  check_compatible(mdp, behavior);
  check_trace_size(mdp, c);
  const double g = mdp.discount();
  Matrix num = resolvent(joint_transition_matrix(mdp, behavior, c), g, "trace_to_weights");
  Matrix den = LuDecomposition(identity_minus(joint_transition_matrix(mdp, behavior), g)).inverse();
  return TdWeights(ratio_of_resolvents(num, den, g));
}

TdWeights importance_weights(const TabularMdp& mdp, const Policy& target, const Policy& behavior) {
  Vec c = materialize_traces(ImportanceSampling{}, target, behavior);
  return trace_to_weights(mdp, behavior, c);
}

ResidualReport residual_report(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                               const TdWeights& w, SaPair start) {
  mdp.check_pair(start);
  if (w.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("residual_report: weight matrix has wrong size");
  }
  return residual_for_row(mdp, target, behavior, w.row(mdp.index(start)), start);
}

ResidualReport residual_for_row(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                                std::span<const double> w_row, SaPair start) {
  mdp.check_pair(start);
  Matrix p_target = joint_transition_matrix(mdp, target);
  Vec dmu = discounted_visitation(mdp, behavior, start).probs;
  return residual_from_parts(mdp, p_target, dmu, w_row, start);
}

double global_contraction_rate(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                               const TdWeights& w) {
  if (w.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("global_contraction_rate: weight matrix has wrong size");
  }
  Matrix p_target = joint_transition_matrix(mdp, target);
  Matrix dmu = visitation_matrix(mdp, behavior);
  double rate = 0.0;
  for (int i = 0; i < mdp.n_pairs(); ++i) {
    rate = std::max(rate, residual_from_parts(mdp, p_target, dmu.row(i), w.row(i), mdp.pair(i)).local_rate);
  }
  return rate;
}

StateActionDist retrace_residual_closed_form(const TabularMdp& mdp, const Policy& target,
                                             const Policy& behavior, std::span<const double> c,
                                             SaPair start, TildeComposition composition) {
  mdp.check_pair(start);
  check_trace_size(mdp, c);
  const double g = mdp.discount();
  const bool via_behavior = composition == TildeComposition::kTraceTimesBehavior;
  Matrix p_tilde = joint_transition_matrix(mdp, via_behavior ? behavior : target, c);
  check_series_convergence(p_tilde, g, "retrace_residual_closed_form");
  Vec e_start(mdp.n_pairs(), 0.0);
  e_start[mdp.index(start)] = 1.0;
  Vec series = LuDecomposition(identity_minus(p_tilde, g)).solve_transposed(e_start);
  Matrix p_target = joint_transition_matrix(mdp, target);
  Vec e = matvec_transposed(p_target, series);
  simd::axpy(-1.0, matvec_transposed(p_tilde, series), e);
  simd::scale(g * (via_behavior ? 1.0 - g : 1.0), e);
  return {start, std::move(e)};
}

VTraceScheme clipped_vtrace_scheme(const Policy& target, const Policy& behavior, double cbar,
                                   double rhobar) {
  return {materialize_traces(Retrace{1.0, cbar}, target, behavior),
          materialize_traces(Retrace{1.0, rhobar}, target, behavior)};
}

void validate_vtrace_scheme(const TabularMdp& mdp, const Policy& behavior, const VTraceScheme& scheme) {
  check_compatible(mdp, behavior);
  check_trace_size(mdp, scheme.c);
  check_trace_size(mdp, scheme.rho);
  for (int i = 0; i < mdp.n_pairs(); ++i) {
    if (!(scheme.c[i] >= 0.0) || !(scheme.rho[i] >= 0.0) || !std::isfinite(scheme.c[i]) ||
        !std::isfinite(scheme.rho[i])) {
      throw std::invalid_argument("VTraceScheme: c and rho must be finite and >= 0 (pair " +
                                  pair_str(mdp.pair(i)) + ")");
    }
  }
  for (int x = 0; x < mdp.n_states(); ++x) {
    double s = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) s += behavior(x, a) * scheme.c[mdp.index(x, a)];
    if (s > 1.0 + 1e-12) {
      throw std::invalid_argument("VTraceScheme: sum_a mu(a|x) c(x,a) exceeds 1 at state " + std::to_string(x));
    }
  }
}

Matrix state_transition_matrix(const TabularMdp& mdp, const Policy& policy, std::span<const double> c) {
  check_compatible(mdp, policy);
  if (!c.empty()) check_trace_size(mdp, c);
  const int S = mdp.n_states();
  Matrix m(S, S);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      double wgt = policy(x, a) * (c.empty() ? 1.0 : c[mdp.index(x, a)]);
      if (wgt != 0.0) simd::axpy(wgt, mdp.next_state_probs(x, a), m.row(x));
    }
  }
  return m;
}

Matrix state_visitation_matrix(const TabularMdp& mdp, const Policy& behavior) {
  const double g = mdp.discount();
  Matrix inv = LuDecomposition(identity_minus(state_transition_matrix(mdp, behavior), g)).inverse();
  simd::scale(1.0 - g, inv.data());
  return inv;
}

StateTdWeights vtrace_trace_to_weights(const TabularMdp& mdp, const Policy& behavior,
                                       std::span<const double> c) {
  check_trace_size(mdp, c);
  const double g = mdp.discount();
  Matrix num = resolvent(state_transition_matrix(mdp, behavior, c), g, "vtrace_trace_to_weights");
  Matrix den = LuDecomposition(identity_minus(state_transition_matrix(mdp, behavior), g)).inverse();
  return StateTdWeights(ratio_of_resolvents(num, den, g));
}

Vec vtrace_td_errors(const TabularMdp& mdp, const Policy& behavior, std::span<const double> rho,
                     const ValueFunction& v) {
  check_compatible(mdp, behavior);
  check_trace_size(mdp, rho);
  if (v.values.size() != static_cast<std::size_t>(mdp.n_states())) {
    throw std::invalid_argument("value function has wrong size");
  }
  const double g = mdp.discount();
  Vec out(mdp.n_states(), 0.0);
  for (int x = 0; x < mdp.n_states(); ++x) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      double wgt = behavior(x, a) * rho[mdp.index(x, a)];
      if (wgt == 0.0) continue;
      double td = mdp.mean_reward(x, a) + g * simd::dot(mdp.next_state_probs(x, a), v.values) - v.values[x];
      out[x] += wgt * td;
    }
  }
  return out;
}

ValueFunction vtrace_apply(const TabularMdp& mdp, const Policy& behavior, const VTraceScheme& scheme,
                           const ValueFunction& v, VTraceMode mode, const StateTdWeights* weights) {
  validate_vtrace_scheme(mdp, behavior, scheme);
  Vec g_err = vtrace_td_errors(mdp, behavior, scheme.rho, v);
  const double g = mdp.discount();
  Vec out = v.values;
  if (mode == VTraceMode::kMultistep) {
    Matrix p = state_transition_matrix(mdp, behavior, scheme.c);
    check_series_convergence(p, g, "vtrace_apply");
    simd::axpy(1.0, LuDecomposition(identity_minus(p, g)).solve(g_err), out);
    return {std::move(out)};
  }
  if (weights == nullptr) throw std::invalid_argument("vtrace_apply: marginalized mode requires state weights");
  const std::size_t S = static_cast<std::size_t>(mdp.n_states());
  if (weights->size() != S) throw std::invalid_argument("vtrace_apply: state weights have wrong size");
  Matrix dmu = state_visitation_matrix(mdp, behavior);
  Vec tmp(S);
  for (std::size_t x = 0; x < S; ++x) {
    auto d = dmu.row(x);
    auto w = weights->row(x);
    for (std::size_t y = 0; y < S; ++y) tmp[y] = d[y] * w[y];
    out[x] += simd::dot(tmp, g_err) / (1.0 - g);
  }
  return {std::move(out)};
}

}  // namespace margop
