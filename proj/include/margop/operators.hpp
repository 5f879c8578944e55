#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "margop/linalg/matrix.hpp"
#include "margop/mdp.hpp"

namespace margop {

// Markovian step-wise trace coefficient families c(x,a).
struct OneStep {};
struct ImportanceSampling {};
struct Retrace {
  double lambda = 1.0;
  double cbar = 1.0;
};
struct TreeBackup {};
struct QLambda {
  double lambda = 1.0;
};
struct CustomTraces {
  Vec c;
};
using TraceScheme = std::variant<OneStep, ImportanceSampling, Retrace, TreeBackup, QLambda, CustomTraces>;

std::string describe(const TraceScheme& scheme);

// Coefficients over flattened (x,a). Throws std::invalid_argument naming the
// pair when pi(a|x) > 0 but mu(a|x) = 0, or on invalid scheme parameters.
Vec materialize_traces(const TraceScheme& scheme, const Policy& target, const Policy& behavior);

// Pairs where c(x,a) > pi(a|x)/mu(a|x) + tol (only pairs with mu > 0 count).
std::vector<SaPair> trace_safety_violations(std::span<const double> c, const Policy& target,
                                            const Policy& behavior, double tol = 1e-12);

// Square matrix over flattened pairs, entry (i,j) = w_i(j).
class TdWeights {
 public:
  TdWeights() = default;
  explicit TdWeights(Matrix m);  // throws unless square with finite entries

  std::size_t size() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
  std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

// Power-iteration estimate of the spectral radius of a nonnegative matrix:
// geometric mean of the normalisation factors over the second half of the run.
double spectral_radius_estimate(const Matrix& a, int iterations = 200);

// Throws std::runtime_error when sum_t (gamma P)^t may diverge. Skipped when
// every row of gamma*P has absolute sum below 1.
void check_series_convergence(const Matrix& p, double discount, const char* what);

// Q + (I - gamma P^{c mu})^{-1} (r + gamma P^pi Q - Q)
QFunction apply_multistep(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                          std::span<const double> c, const QFunction& q);

// Q(x,a) + (1-gamma)^{-1} sum d^mu_{x,a}(j) w_{x,a}(j) Delta(j) for every (x,a).
QFunction apply_marginalized(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                             const TdWeights& w, const QFunction& q);

// Single component of apply_marginalized with an arbitrary weight row.
double apply_marginalized_row(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                              std::span<const double> w_row, SaPair start, const QFunction& q);

// W = (I - gamma P^{c mu})^{-1} / (I - gamma P^mu)^{-1} elementwise, with 0
// wherever d^mu <= kZeroVisitation.
TdWeights trace_to_weights(const TabularMdp& mdp, const Policy& behavior, std::span<const double> c);

inline constexpr double kZeroVisitation = 1e-14;

// d^pi / d^mu elementwise; throws if mu does not cover pi.
TdWeights importance_weights(const TabularMdp& mdp, const Policy& target, const Policy& behavior);

struct ResidualReport {
  SaPair start;
  StateActionDist residual;  // signed E^w
  double local_rate = 0.0;   // ||E||_1 / (1-gamma)
  bool contractive = false;  // local_rate < 1
};

ResidualReport residual_report(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                               const TdWeights& w, SaPair start);
ResidualReport residual_for_row(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                                std::span<const double> w_row, SaPair start);

double global_contraction_rate(const TabularMdp& mdp, const Policy& target, const Policy& behavior,
                               const TdWeights& w);

// How the sub-stochastic policy pi~ is composed from the traces.
enum class TildeComposition {
  kTraceTimesBehavior,  // pi~ = c * mu, scaled by (1-gamma): equals residual_report's E
  kTraceTimesTarget,    // pi~ = c * pi, unscaled
};

// E = gamma k ((P^pi)^T - (P^pi~)^T) sum_t gamma^t ((P^pi~)^T)^t delta_start,
// k = (1-gamma) for kTraceTimesBehavior and 1 otherwise.
StateActionDist retrace_residual_closed_form(
    const TabularMdp& mdp, const Policy& target, const Policy& behavior, std::span<const double> c,
    SaPair start, TildeComposition composition = TildeComposition::kTraceTimesBehavior);

// ---- V-trace ----

struct VTraceScheme {
  Vec c;
  Vec rho;
};

// c = min(cbar, pi/mu), rho = min(rhobar, pi/mu).
VTraceScheme clipped_vtrace_scheme(const Policy& target, const Policy& behavior, double cbar,
                                   double rhobar);

// Throws unless c, rho >= 0 and sum_a mu(a|x) c(x,a) <= 1 for every x.
void validate_vtrace_scheme(const TabularMdp& mdp, const Policy& behavior, const VTraceScheme& scheme);

// P~(x,y) = sum_a policy(a|x) c(x,a) p(y|x,a); empty c means c = 1.
Matrix state_transition_matrix(const TabularMdp& mdp, const Policy& policy,
                               std::span<const double> c = {});

class StateTdWeights {
 public:
  StateTdWeights() = default;
  explicit StateTdWeights(Matrix m);

  std::size_t size() const noexcept { return m_.rows(); }
  double operator()(std::size_t x, std::size_t y) const noexcept { return m_(x, y); }
  std::span<const double> row(std::size_t x) const noexcept { return m_.row(x); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

// (1-gamma)(I - gamma P^mu_S)^{-1}
Matrix state_visitation_matrix(const TabularMdp& mdp, const Policy& behavior);

// w_x(y) = (I - gamma P~)^{-1}(x,y) / (I - gamma P^mu_S)^{-1}(x,y), 0 where d^mu_x(y) is zero.
StateTdWeights vtrace_trace_to_weights(const TabularMdp& mdp, const Policy& behavior,
                                       std::span<const double> c);

enum class VTraceMode { kMultistep, kMarginalized };

// g(x) = sum_a mu(a|x) rho(x,a) (r(x,a) + gamma E V(x') - V(x))
Vec vtrace_td_errors(const TabularMdp& mdp, const Policy& behavior, std::span<const double> rho,
                     const ValueFunction& v);

// Multistep: V + (I - gamma P~)^{-1} g. Marginalized: V(x) + (1-gamma)^{-1}
// sum_y d^mu_x(y) w_x(y) g(y), requiring weights.
ValueFunction vtrace_apply(const TabularMdp& mdp, const Policy& behavior, const VTraceScheme& scheme,
                           const ValueFunction& v, VTraceMode mode,
                           const StateTdWeights* weights = nullptr);

}  // namespace margop
