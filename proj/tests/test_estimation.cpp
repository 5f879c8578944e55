#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "margop/envs.hpp"
#include "margop/estimation.hpp"
#include "margop/operators.hpp"
#include "oracles/random_mdp.hpp"

using namespace margop;
namespace fx = margop::fixtures;

namespace {

struct Moments {
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double var() const { return std::max(0.0, (sum2 - n * mean() * mean()) / (n - 1)); }
  double se() const { return std::sqrt(var() / n); }
};

}  // namespace

TEST(RandomTime, ZeroDiscountAlwaysZero) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_random_time(0.0, rng), 0);
  EXPECT_THROW(sample_random_time(1.0, rng), std::invalid_argument);
  EXPECT_EQ(sample_random_time(0.7, 5u), sample_random_time(0.7, 5u));
}

TEST(RandomTime, GeometricMeanAndMass) {
  std::mt19937_64 rng(2);
  Moments m;
  for (int i = 0; i < 1000000; ++i) m.add(sample_random_time(0.9, rng));
  EXPECT_NEAR(m.mean(), 9.0, 3.0 * m.se());
  long ones = 0;
  const long n = 1000000;
  for (long i = 0; i < n; ++i) ones += sample_random_time(0.5, rng) == 1;
  double p = static_cast<double>(ones) / n;
  EXPECT_NEAR(p, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(EstimateOperator, ZeroTraceDeterministicIsOneStepBackup) {
  std::mt19937_64 rng(3);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 2, .discount = 0.9, .deterministic = true});
  Policy pi = fx::random_policy(5, 2, rng);
  Policy mu = fx::random_policy(5, 2, rng, 0.1);
  QFunction q = fx::random_q(5, 2, rng);
  Vec c(10, 0.0);
  QFunction exact = apply_multistep(mdp, pi, mu, c, q);
  for (int k = 0; k < 20; ++k) {
    Trajectory t = sample_trajectory(mdp, mu, {k % 5, k % 2}, 50, static_cast<std::uint64_t>(k));
    EstimatorParams p{OperatorFamily::kMultistep, EstimateKind::kTrajectory, c};
    EXPECT_NEAR(estimate_operator(t, mdp, pi, q, p).value, exact(k % 5, k % 2), 1e-12);
  }
}

TEST(EstimateOperator, ChainTrajectoryMultistepIsUnbiased) {
  Benchmark b = build_chain(ChainSpec{});
  Vec c = materialize_traces(Retrace{1.0, 1.0}, b.target, b.behavior);
  std::mt19937_64 rng(4);
  QFunction q = fx::random_q(b.mdp.n_states(), b.mdp.n_actions(), rng);
  for (int a = 0; a < 5; ++a) q(b.mdp.n_states() - 1, a) = 0.0;  // terminal
  QFunction exact = apply_multistep(b.mdp, b.target, b.behavior, c, q);
  Moments m;
  for (int k = 0; k < 100000; ++k) {
    Trajectory t = sample_trajectory(b.mdp, b.behavior, {0, 0}, 100, rng);
    m.add(estimate_operator(t, b.mdp, b.target, q, {OperatorFamily::kMultistep, EstimateKind::kTrajectory, c})
              .value);
  }
  EXPECT_NEAR(m.mean(), exact(0, 0), 3.0 * m.se());
}

TEST(EstimateOperator, AllFourFormsUnbiasedOnNoisyMdp) {
  std::mt19937_64 rng(5);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 2, .discount = 0.8, .noise_std = 0.5});
  Policy pi = fx::random_policy(4, 2, rng);
  Policy mu = fx::random_policy(4, 2, rng, 0.2);
  Vec c = materialize_traces(Retrace{1.0, 1.0}, pi, mu);
  TdWeights w = trace_to_weights(mdp, mu, c);
  QFunction q = fx::random_q(4, 2, rng);
  const SaPair start{1, 0};
  const double target = apply_multistep(mdp, pi, mu, c, q)(1, 0);
  const int horizon = horizon_for_tolerance(mdp.discount());
  auto row = w.row(mdp.index(start));
  Moments ms[4];
  for (int k = 0; k < 100000; ++k) {
    Trajectory t = sample_trajectory(mdp, mu, start, horizon, rng);
    int tau = sample_random_time(mdp.discount(), rng);
    ms[0].add(estimate_operator(t, mdp, pi, q, {OperatorFamily::kMultistep, EstimateKind::kTrajectory, c}).value);
    ms[1].add(estimate_operator(t, mdp, pi, q, {OperatorFamily::kMultistep, EstimateKind::kRandomTime, c, tau}).value);
    ms[2].add(estimate_operator(t, mdp, pi, q, {OperatorFamily::kMarginalized, EstimateKind::kTrajectory, row}).value);
    ms[3].add(
        estimate_operator(t, mdp, pi, q, {OperatorFamily::kMarginalized, EstimateKind::kRandomTime, row, tau}).value);
  }
  for (int f = 0; f < 4; ++f) EXPECT_NEAR(ms[f].mean(), target, 3.5 * ms[f].se()) << "form " << f;
}

TEST(EstimateOperator, MarginalizedRandomTimeHasSmallerVarianceOnDeterministicMdp) {
  std::mt19937_64 rng(6);
  for (int inst = 0; inst < 5; ++inst) {
    TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 2, .discount = 0.8, .deterministic = true});
    Policy pi = fx::random_policy(5, 2, rng);
    Policy mu = fx::random_policy(5, 2, rng, 0.1);
    Vec c = materialize_traces(Retrace{1.0, 1.0}, pi, mu);
    TdWeights w = trace_to_weights(mdp, mu, c);
    QFunction q = fx::random_q(5, 2, rng);
    const SaPair start{0, 0};
    auto row = w.row(0);
    Moments r, m;
    const int horizon = horizon_for_tolerance(0.8);
    for (int k = 0; k < 50000; ++k) {
      int tau = sample_random_time(0.8, rng);
      Trajectory t = sample_trajectory(mdp, mu, start, std::min(horizon, tau + 2), rng);
      r.add(estimate_operator(t, mdp, pi, q, {OperatorFamily::kMultistep, EstimateKind::kRandomTime, c, tau}).value);
      m.add(
          estimate_operator(t, mdp, pi, q, {OperatorFamily::kMarginalized, EstimateKind::kRandomTime, row, tau}).value);
    }
    double pooled = std::sqrt(r.var() * r.var() * 2.0 / (r.n - 1) + m.var() * m.var() * 2.0 / (m.n - 1));
    EXPECT_LE(m.var(), r.var() + 3.0 * pooled);
  }
}

TEST(EstimateOperator, Errors) {
  std::mt19937_64 rng(7);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 3, .n_actions = 2});
  Policy u = Policy::uniform(3, 2);
  Vec c(6, 1.0);
  Trajectory t = sample_trajectory(mdp, u, {1, 1}, 5, 1u);
  QFunction q = QFunction::zeros(3, 2);
  EstimatorParams mismatch{OperatorFamily::kMultistep, EstimateKind::kTrajectory, c, 0, SaPair{0, 0}};
  EXPECT_THROW(estimate_operator(t, mdp, u, q, mismatch), std::invalid_argument);
  EstimatorParams late{OperatorFamily::kMultistep, EstimateKind::kRandomTime, c, 10};
  EXPECT_THROW(estimate_operator(t, mdp, u, q, late), std::invalid_argument);
  Vec short_c(5, 1.0);
  EXPECT_THROW(estimate_operator(t, mdp, u, q, {OperatorFamily::kMultistep, EstimateKind::kTrajectory, short_c}),
               std::invalid_argument);
}

TEST(EstimateOperator, RandomTimePastAbsorptionAddsNothing) {
  ChainSpec spec;
  spec.noise_std = 0.0;
  Benchmark b = build_chain(spec);
  Trajectory t = sample_trajectory(b.mdp, b.behavior, {0, 0}, 100, 3u);
  ASSERT_TRUE(t.terminated);
  QFunction q = QFunction::zeros(b.mdp.n_states(), 5);
  q(0, 0) = 0.3;
  Vec c(b.mdp.n_pairs(), 1.0);
  auto s = estimate_operator(t, b.mdp, b.target, q, {OperatorFamily::kMultistep, EstimateKind::kRandomTime, c, 50});
  EXPECT_DOUBLE_EQ(s.value, 0.3);
}

TEST(BatchTargets, MatchPerOffsetEstimates) {
  std::mt19937_64 rng(8);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 3, .discount = 0.9, .noise_std = 0.3});
  Policy pi = fx::random_policy(5, 3, rng);
  Policy mu = fx::random_policy(5, 3, rng, 0.1);
  Vec c = materialize_traces(Retrace{0.9, 1.0}, pi, mu);
  TdWeights w = trace_to_weights(mdp, mu, c);
  QFunction q = fx::random_q(5, 3, rng);
  Trajectory t = sample_trajectory(mdp, mu, {2, 1}, 40, rng);
  Vec td = sampled_td_errors(t, mdp, pi, q);
  Vec ms = multistep_targets(t, mdp, td, c, q);
  Vec mg = marginalized_targets(t, mdp, td, w, q);
  for (std::size_t k = 0; k < t.length(); ++k) {
    int i = mdp.index(t.steps[k].state, t.steps[k].action);
    EXPECT_NEAR(ms[k],
                estimate_operator(t, mdp, pi, q, {OperatorFamily::kMultistep, EstimateKind::kTrajectory, c}, k).value,
                1e-12);
    EXPECT_NEAR(
        mg[k],
        estimate_operator(t, mdp, pi, q, {OperatorFamily::kMarginalized, EstimateKind::kTrajectory, w.row(i)}, k)
            .value,
        1e-12);
  }
}

TEST(WeightEstimator, ZeroTraceConcentratesOnStart) {
  Benchmark b = build_chain(ChainSpec{});
  Vec c(b.mdp.n_pairs(), 0.0);
  WeightEstimationOptions o;
  o.n_iterations = 200;
  o.seed = 4;
  WeightEstimate e = tabular_weight_estimation(b.mdp, b.behavior, c, o);
  for (int i = 0; i < b.mdp.n_pairs(); ++i) {
    if (e.row_updates[i] == 0) continue;
    for (int j = 0; j < b.mdp.n_pairs(); ++j) {
      if (j == i) {
        EXPECT_GT(e.raw(i, j), 0.0);
      } else {
        EXPECT_EQ(e.raw(i, j), 0.0);
      }
    }
  }
}

TEST(WeightEstimator, OnPolicyUnitTracesNormalizeToOne) {
  ChainSpec spec;
  spec.off_policy_level = 1.0;
  Benchmark b = build_chain(spec);
  Vec c = materialize_traces(ImportanceSampling{}, b.target, b.behavior);
  WeightEstimationOptions o;
  o.seed = 5;
  WeightEstimate e = tabular_weight_estimation(b.mdp, b.behavior, c, o);
  for (int i = 0; i < b.mdp.n_pairs(); ++i) {
    if (e.row_updates[i] == 0) continue;
    for (int j = 0; j < b.mdp.n_pairs(); ++j) {
      if (e.normalized(i, j) != 0.0) EXPECT_NEAR(e.normalized(i, j), 1.0, 0.05);
    }
  }
}

TEST(WeightEstimator, RowsNeverUpdatedStayAtZero) {
  Benchmark b = build_chain(ChainSpec{});
  Vec c = materialize_traces(Retrace{}, b.target, b.behavior);
  WeightEstimationOptions o;
  o.n_iterations = 50;
  WeightEstimate e = tabular_weight_estimation(b.mdp, b.behavior, c, o);
  int terminal_row = b.mdp.index(b.mdp.n_states() - 1, 0);
  EXPECT_EQ(e.row_updates[terminal_row], 0);
  for (int j = 0; j < b.mdp.n_pairs(); ++j) EXPECT_EQ(e.raw(terminal_row, j), 0.0);
}

TEST(WeightEstimator, ChainRetraceConvergesWithHarmonicSteps) {
  Benchmark b = build_chain(ChainSpec{});
  Vec c = materialize_traces(Retrace{1.0, 1.0}, b.target, b.behavior);
  TdWeights exact = trace_to_weights(b.mdp, b.behavior, c);
  WeightEstimationOptions o;
  o.n_iterations = 10000;
  o.schedule = StepSchedule::kSampleAverage;
  o.seed = 11;
  WeightEstimate e = tabular_weight_estimation(b.mdp, b.behavior, c, o);
  const int n_live = b.mdp.n_pairs() - b.mdp.n_actions();  // skip terminal columns
  double worst = 0.0;
  for (int i = 0; i < n_live; ++i) {
    if (e.row_updates[i] == 0) continue;
    for (int j = 0; j < n_live; ++j) worst = std::max(worst, std::fabs(e.normalized(i, j) - exact(i, j)));
  }
  EXPECT_LT(worst, 0.1);
}

TEST(WeightEstimator, ConstantStepTracksRawVisitationScale) {
  // raw rows estimate w * d^mu, whose mass lies in [0, 1]
  Benchmark b = build_chain(ChainSpec{});
  Vec c = materialize_traces(Retrace{}, b.target, b.behavior);
  WeightEstimationOptions o;
  o.n_iterations = 2000;
  o.seed = 2;
  WeightEstimate e = tabular_weight_estimation(b.mdp, b.behavior, c, o);
  for (int i = 0; i < b.mdp.n_pairs(); ++i) {
    double s = 0.0;
    for (int j = 0; j < b.mdp.n_pairs(); ++j) {
      EXPECT_GE(e.raw(i, j), 0.0);
      s += e.raw(i, j);
    }
    EXPECT_LE(s, 1.0 + 1e-12);
  }
}

TEST(WeightEstimator, RejectsBadOptions) {
  Benchmark b = build_chain(ChainSpec{});
  Vec c(b.mdp.n_pairs(), 1.0);
  EXPECT_THROW(TabularWeightEstimator(b.mdp, c, {0.0}), std::invalid_argument);
  EXPECT_THROW(TabularWeightEstimator(b.mdp, Vec(3, 1.0)), std::invalid_argument);
  WeightEstimationOptions o;
  o.n_iterations = 0;
  EXPECT_THROW(tabular_weight_estimation(b.mdp, b.behavior, c, o), std::invalid_argument);
}

TEST(ConditionalIs, UnitTracesOnPolicyGiveOnes) {
  std::mt19937_64 rng(9);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 2});
  Policy p = fx::random_policy(4, 2, rng, 0.1);
  ConditionalIsEstimate e = conditional_is_oracle(mdp, p, Vec(8, 1.0), {0, 0}, 10000, 1);
  for (int j = 0; j < 8; ++j)
    if (e.counts[j] > 0) EXPECT_DOUBLE_EQ(e.mean[j], 1.0);
}

TEST(ConditionalIs, ZeroTracesKeepOnlyStart) {
  Benchmark b = build_chain(ChainSpec{});
  ConditionalIsEstimate e = conditional_is_oracle(b.mdp, b.behavior, Vec(b.mdp.n_pairs(), 0.0), {0, 2}, 20000, 2);
  for (int j = 0; j < b.mdp.n_pairs(); ++j) EXPECT_DOUBLE_EQ(e.mean[j], j == b.mdp.index(0, 2) ? 1.0 : 0.0);
}

TEST(ConditionalIs, MatchesExactWeightsOnRandomMdp) {
  std::mt19937_64 rng(10);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 2, .discount = 0.8});
  Policy pi = fx::random_policy(4, 2, rng);
  Policy mu = fx::random_policy(4, 2, rng, 0.1);
  Vec c = materialize_traces(Retrace{1.0, 1.0}, pi, mu);
  TdWeights w = trace_to_weights(mdp, mu, c);
  ConditionalIsEstimate e = conditional_is_oracle(mdp, mu, c, {2, 1}, 100000, 3);
  for (int j = 0; j < 8; ++j) {
    if (e.counts[j] < 100) continue;
    EXPECT_NEAR(e.mean[j], w(mdp.index(2, 1), j), 3.5 * e.std_error[j] + 1e-12) << j;
  }
}
