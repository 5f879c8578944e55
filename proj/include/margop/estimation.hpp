#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "margop/linalg/matrix.hpp"
#include "margop/mdp.hpp"
#include "margop/operators.hpp"

namespace margop {

// tau with P(tau = n) = (1-gamma) gamma^n.
int sample_random_time(double discount, std::mt19937_64& rng);
int sample_random_time(double discount, std::uint64_t seed);

enum class EstimateKind { kTrajectory, kRandomTime };
enum class OperatorFamily { kMultistep, kMarginalized };

struct EstimatorSample {
  double value = 0.0;
  SaPair start;
  EstimateKind kind = EstimateKind::kTrajectory;
  OperatorFamily family = OperatorFamily::kMultistep;
};

struct EstimatorParams {
  OperatorFamily family = OperatorFamily::kMultistep;
  EstimateKind kind = EstimateKind::kTrajectory;
  // Trace vector c over pairs (multistep) or the start pair's weight row (marginalized).
  std::span<const double> coefficients;
  int random_time = 0;  // used when kind == kRandomTime
  std::optional<SaPair> start;  // when set, must match the pair at the offset
};

// Estimate of (R^c Q)(x_k,a_k) or (M^w Q)(x_k,a_k) from the suffix of the
// trajectory starting at step `offset`. Q must vanish on terminal states.
// Throws on start mismatch, or when a random time reaches past the end of a
// truncated (non-terminated) trajectory.
EstimatorSample estimate_operator(const Trajectory& traj, const TabularMdp& mdp, const Policy& target,
                                  const QFunction& q, const EstimatorParams& params,
                                  std::size_t offset = 0);

// r_t + gamma sum_a pi(a|x_{t+1}) Q(x_{t+1},a) - Q(x_t,a_t) for every step.
Vec sampled_td_errors(const Trajectory& traj, const TabularMdp& mdp, const Policy& target,
                      const QFunction& q);

// Trajectory-form multistep estimates for every offset k, by backward recursion.
Vec multistep_targets(const Trajectory& traj, const TabularMdp& mdp, std::span<const double> td,
                      std::span<const double> c, const QFunction& q);

// Trajectory-form marginalized estimates for every offset k, using row
// (x_k,a_k) of w for the suffix from k.
Vec marginalized_targets(const Trajectory& traj, const TabularMdp& mdp, std::span<const double> td,
                         const TdWeights& w, const QFunction& q);

// ---- tabular TD-weight estimation (Monte-Carlo, EMA per start row) ----

enum class StepSchedule {
  kConstant,       // w <- (1-alpha) w + alpha w_hat
  kSampleAverage,  // alpha_n = 1/n, n = updates of that row
};

enum class WeightNormalization {
  kExactVisitation,      // divide by exact d^mu
  kEstimatedVisitation,  // divide by the same estimator run with c = 1
};

struct WeightEstimatorOptions {
  double alpha = 0.1;
  StepSchedule schedule = StepSchedule::kConstant;
  // Per-pair ratio sum_t C_t 1[j] / sum_t 1[j]; otherwise the plain sum.
  bool average_over_visits = true;
};

// Every step k of an observed trajectory is an initial pair; the row of
// (x_k,a_k) moves toward w_hat built from C_t = (1-gamma) gamma^{t-k} prod_{k<s<=t} c_s.
// The raw table therefore tracks d^{w^c} rows rather than w^c.
class TabularWeightEstimator {
 public:
  TabularWeightEstimator(const TabularMdp& mdp, Vec c, WeightEstimatorOptions options = {});

  void observe(const Trajectory& traj);

  const Matrix& raw() const noexcept { return raw_; }
  const Matrix& raw_visitation() const noexcept { return visit_; }
  const std::vector<long long>& row_updates() const noexcept { return updates_; }

  // Divides by the c = 1 run where it is positive.
  TdWeights normalized_by_estimate() const;
  // Divides by a given visitation matrix (rows d^mu) where it exceeds kZeroVisitation.
  TdWeights normalized_by(const Matrix& visitation) const;
  // Row i only; visitation == nullptr selects the estimated visitation.
  void normalized_row(std::size_t i, const Matrix* visitation, std::span<double> out) const;

 private:
  int n_actions_;
  double discount_;
  Vec c_;
  WeightEstimatorOptions options_;
  Matrix raw_;
  Matrix visit_;
  std::vector<long long> updates_;
  Vec sum_c_, sum_one_, count_;
  std::vector<int> touched_;
};

struct WeightEstimationOptions {
  int n_iterations = 10000;
  double alpha = 0.1;
  StepSchedule schedule = StepSchedule::kConstant;
  WeightNormalization normalization = WeightNormalization::kEstimatedVisitation;
  bool average_over_visits = true;
  std::vector<int> start_states = {0};  // drawn uniformly; first action from mu
  std::uint64_t seed = 0;
};

struct WeightEstimate {
  Matrix raw;
  TdWeights normalized;
  std::vector<long long> row_updates;
};

WeightEstimate tabular_weight_estimation(const TabularMdp& mdp, const Policy& behavior,
                                         std::span<const double> c, const WeightEstimationOptions& options);

// ---- conditional importance-sampling oracle ----

struct ConditionalIsEstimate {
  Vec mean;    // E[prod_{1<=s<=tau} c_s | (x_tau,a_tau) = j]
  Vec std_error;  // sample standard error per pair (0 with fewer than 2 arrivals)
  std::vector<long long> counts;
};

// Rollouts continue through terminal self-loops so arrivals follow d^mu exactly.
ConditionalIsEstimate conditional_is_oracle(const TabularMdp& mdp, const Policy& behavior,
                                            std::span<const double> c, SaPair start,
                                            long long n_trajectories, std::uint64_t seed);

}  // namespace margop
