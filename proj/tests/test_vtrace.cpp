#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "margop/operators.hpp"
#include "oracles/dense_oracles.hpp"
#include "oracles/random_mdp.hpp"

using namespace margop;
namespace fx = margop::fixtures;
namespace orc = margop::fixtures::oracle;

namespace {

struct Instance {
  TabularMdp mdp;
  Policy pi;
  Policy mu;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ns(2, 8), na(1, 4);
  int S = ns(rng), A = na(rng);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = S, .n_actions = A, .discount = 0.9, .max_successors = 3});
  return {mdp, fx::random_policy(S, A, rng), fx::random_policy(S, A, rng, 0.05)};
}

Vec ratio(const Policy& pi, const Policy& mu) {
  Vec c(pi.probs().size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = pi.probs()[i] / mu.probs()[i];
  return c;
}

}  // namespace

TEST(VTrace, TargetValueIsFixedPointWithRatioCoefficients) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    Instance in = random_instance(rng);
    Vec c = ratio(in.pi, in.mu);
    VTraceScheme s{c, c};
    ValueFunction v = exact_v(in.mdp, in.pi);
    ValueFunction m = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMultistep);
    EXPECT_LT(max_abs_diff(m.values, v.values), 1e-9);
    StateTdWeights sw = vtrace_trace_to_weights(in.mdp, in.mu, c);
    ValueFunction mm = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMarginalized, &sw);
    EXPECT_LT(max_abs_diff(mm.values, v.values), 1e-9);
  }
}

TEST(VTrace, ZeroTraceIsOneStepCorrectedBackup) {
  std::mt19937_64 rng(2);
  Instance in = random_instance(rng);
  const int S = in.mdp.n_states(), A = in.mdp.n_actions();
  VTraceScheme s = clipped_vtrace_scheme(in.pi, in.mu, 0.0, 1.0);
  ValueFunction v{fx::random_vector(S, rng)};
  ValueFunction out = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMultistep);
  for (int x = 0; x < S; ++x) {
    double g = 0.0;
    for (int a = 0; a < A; ++a) {
      double next = 0.0;
      for (int y = 0; y < S; ++y) next += in.mdp.transition(x, a, y) * v.values[y];
      g += in.mu(x, a) * s.rho[in.mdp.index(x, a)] *
           (in.mdp.mean_reward(x, a) + in.mdp.discount() * next - v.values[x]);
    }
    EXPECT_NEAR(out.values[x], v.values[x] + g, 1e-12);
  }
}

TEST(VTrace, MultistepAndMarginalizedAgree) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    Instance in = random_instance(rng);
    VTraceScheme s = clipped_vtrace_scheme(in.pi, in.mu, 1.0, 1.5);
    StateTdWeights sw = vtrace_trace_to_weights(in.mdp, in.mu, s.c);
    ValueFunction v{fx::random_vector(in.mdp.n_states(), rng, -3.0, 3.0)};
    ValueFunction a = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMultistep);
    ValueFunction b = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMarginalized, &sw);
    EXPECT_LT(max_abs_diff(a.values, b.values), 1e-8);
  }
}

TEST(VTrace, MultistepMatchesTruncatedSeries) {
  std::mt19937_64 rng(4);
  Instance in = random_instance(rng);
  VTraceScheme s = clipped_vtrace_scheme(in.pi, in.mu, 0.9, 1.0);
  ValueFunction v{fx::random_vector(in.mdp.n_states(), rng)};
  Vec g = vtrace_td_errors(in.mdp, in.mu, s.rho, v);
  Eigen::VectorXd series =
      orc::truncated_series(orc::state_kernel(in.mdp, in.mu, s.c), in.mdp.discount(), orc::to_eigen(g), 400);
  ValueFunction out = vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMultistep);
  for (int x = 0; x < in.mdp.n_states(); ++x) EXPECT_NEAR(out.values[x], v.values[x] + series(x), 1e-9);
}

TEST(VTrace, StateWeightsSatisfyBalanceEquation) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    Instance in = random_instance(rng);
    const int S = in.mdp.n_states();
    const double gm = in.mdp.discount();
    VTraceScheme s = clipped_vtrace_scheme(in.pi, in.mu, 1.0, 1.0);
    StateTdWeights sw = vtrace_trace_to_weights(in.mdp, in.mu, s.c);
    Matrix dmu = state_visitation_matrix(in.mdp, in.mu);
    Matrix pt = state_transition_matrix(in.mdp, in.mu, s.c).transposed();
    for (int x = 0; x < S; ++x) {
      Vec d(S);
      for (int y = 0; y < S; ++y) d[y] = sw(x, y) * dmu(x, y);
      Vec pd = matvec(pt, d);
      double res = 0.0;
      for (int y = 0; y < S; ++y) res += std::fabs((x == y ? 1 - gm : 0.0) + gm * pd[y] - d[y]);
      EXPECT_LT(res, 1e-10);
    }
  }
}

TEST(VTrace, OnPolicyUnitTracesGiveUnitWeights) {
  std::mt19937_64 rng(6);
  Instance in = random_instance(rng);
  StateTdWeights sw = vtrace_trace_to_weights(in.mdp, in.mu, Vec(in.mdp.n_pairs(), 1.0));
  Matrix dmu = state_visitation_matrix(in.mdp, in.mu);
  for (int x = 0; x < in.mdp.n_states(); ++x)
    for (int y = 0; y < in.mdp.n_states(); ++y)
      EXPECT_NEAR(sw(x, y), dmu(x, y) > 1e-14 ? 1.0 : 0.0, 1e-10);
}

TEST(VTrace, ZeroTracesConcentrateOnStart) {
  std::mt19937_64 rng(7);
  Instance in = random_instance(rng);
  StateTdWeights sw = vtrace_trace_to_weights(in.mdp, in.mu, Vec(in.mdp.n_pairs(), 0.0));
  for (int x = 0; x < in.mdp.n_states(); ++x)
    for (int y = 0; y < in.mdp.n_states(); ++y) {
      if (x == y) {
        EXPECT_GT(sw(x, y), 0.0);
      } else {
        EXPECT_EQ(sw(x, y), 0.0);
      }
    }
}

TEST(VTrace, StateWeightsMatchConditionalMonteCarlo) {
  std::mt19937_64 rng(8);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 2, .discount = 0.8});
  Policy pi = fx::random_policy(4, 2, rng);
  Policy mu = fx::random_policy(4, 2, rng, 0.1);
  VTraceScheme s = clipped_vtrace_scheme(pi, mu, 1.0, 1.0);
  StateTdWeights sw = vtrace_trace_to_weights(mdp, mu, s.c);
  const int start = 0;
  const long n = 100000;
  std::geometric_distribution<int> tau(1.0 - mdp.discount());
  Vec sum(4, 0.0), sum2(4, 0.0);
  std::vector<long> cnt(4, 0);
  for (long k = 0; k < n; ++k) {
    int t = tau(rng);
    int x = start;
    double prod = 1.0;  // c_0 ... c_{t-1}
    for (int step = 0; step < t; ++step) {
      int a = mu.sample(x, rng);
      prod *= s.c[mdp.index(x, a)];
      x = sample_next_state(mdp, x, a, rng);
    }
    sum[x] += prod;
    sum2[x] += prod * prod;
    ++cnt[x];
  }
  for (int y = 0; y < 4; ++y) {
    if (cnt[y] < 100) continue;
    double m = sum[y] / cnt[y];
    double se = std::sqrt(std::max(sum2[y] / cnt[y] - m * m, 0.0) / (cnt[y] - 1));
    EXPECT_NEAR(m, sw(start, y), 3.5 * se + 1e-12) << "state " << y;
  }
}

TEST(VTrace, Validation) {
  std::mt19937_64 rng(9);
  Instance in = random_instance(rng);
  VTraceScheme s = clipped_vtrace_scheme(in.pi, in.mu, 1.0, 1.0);
  ValueFunction v{Vec(in.mdp.n_states(), 0.0)};
  EXPECT_THROW(vtrace_apply(in.mdp, in.mu, s, v, VTraceMode::kMarginalized), std::invalid_argument);
  VTraceScheme big{Vec(in.mdp.n_pairs(), 1.5), Vec(in.mdp.n_pairs(), 1.0)};
  EXPECT_THROW(validate_vtrace_scheme(in.mdp, in.mu, big), std::invalid_argument);
  VTraceScheme neg{Vec(in.mdp.n_pairs(), 0.5), Vec(in.mdp.n_pairs(), -1.0)};
  EXPECT_THROW(validate_vtrace_scheme(in.mdp, in.mu, neg), std::invalid_argument);
}
