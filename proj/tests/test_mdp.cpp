#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "margop/envs.hpp"
#include "margop/mdp.hpp"
#include "oracles/dense_oracles.hpp"
#include "oracles/random_mdp.hpp"

using namespace margop;
namespace fx = margop::fixtures;
namespace orc = margop::fixtures::oracle;

namespace {

TabularMdp absorbing_one(double reward, double discount) {
  return TabularMdp(1, 1, Vec{1.0}, Vec{reward}, Vec{0.0}, discount);
}

TabularMdp two_cycle(double discount) {
  return TabularMdp(2, 1, Vec{0, 1, 1, 0}, Vec{0, 0}, Vec{0, 0}, discount);
}

}  // namespace

TEST(TabularMdp, RejectsBadInputs) {
  EXPECT_THROW(TabularMdp(1, 1, Vec{0.9}, Vec{0}, Vec{0}, 0.9), std::invalid_argument);
  EXPECT_THROW(TabularMdp(1, 1, Vec{1.0}, Vec{0}, Vec{-0.1}, 0.9), std::invalid_argument);
  EXPECT_THROW(TabularMdp(1, 1, Vec{1.0}, Vec{0}, Vec{0}, 1.0), std::invalid_argument);
  EXPECT_THROW(TabularMdp(1, 1, Vec{1.0, 0.0}, Vec{0}, Vec{0}, 0.5), std::invalid_argument);
  // terminal state with nonzero reward
  EXPECT_THROW(TabularMdp(1, 1, Vec{1.0}, Vec{1.0}, Vec{0}, 0.5, {0}), std::invalid_argument);
  // terminal state that leaks
  EXPECT_THROW(TabularMdp(2, 1, Vec{0, 1, 0, 1}, Vec{0, 0}, Vec{0, 0}, 0.5, {0}), std::invalid_argument);
  TabularMdp ok(2, 1, Vec{0, 1, 0, 1}, Vec{1, 0}, Vec{0, 0}, 0.5, {1});
  EXPECT_TRUE(ok.is_terminal(1));
  EXPECT_FALSE(ok.is_terminal(0));
  EXPECT_THROW(ok.check_pair({2, 0}), std::out_of_range);
}

TEST(Policy, ValidatesRows) {
  EXPECT_THROW(Policy(1, 2, Vec{0.5, 0.4}), std::invalid_argument);
  EXPECT_THROW(Policy(1, 2, Vec{1.5, -0.5}), std::invalid_argument);
  Policy u = Policy::uniform(3, 4);
  EXPECT_DOUBLE_EQ(u(2, 3), 0.25);
  Policy d = Policy::deterministic(2, 3, {2, 0});
  EXPECT_EQ(d(0, 2), 1.0);
  EXPECT_EQ(d(1, 0), 1.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(d.sample(0, rng), 2);
}

TEST(QFunction, ValidatesAndComputesExpectations) {
  EXPECT_THROW(QFunction(2, 2, Vec{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(QFunction(1, 1, Vec{NAN}), std::invalid_argument);
  QFunction q(1, 2, Vec{1.0, 3.0});
  EXPECT_DOUBLE_EQ(q.expected(0, Policy(1, 2, Vec{0.25, 0.75})), 2.5);
}

TEST(JointTransition, TwoCycleIsPermutation) {
  Matrix p = joint_transition_matrix(two_cycle(0.8), Policy::uniform(2, 1));
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(p(1, 0), 1.0);
  EXPECT_EQ(p(1, 1), 0.0);
}

TEST(JointTransition, ZeroTraceGivesZeroMatrix) {
  std::mt19937_64 rng(2);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 3});
  Vec c(mdp.n_pairs(), 0.0);
  Matrix p = joint_transition_matrix(mdp, Policy::uniform(4, 3), c);
  EXPECT_EQ(max_abs(p.data()), 0.0);
}

TEST(JointTransition, RowsAreStochasticAndMatchLoops) {
  std::mt19937_64 rng(3);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 3});
  Policy pol = Policy::uniform(4, 3);
  Matrix p = joint_transition_matrix(mdp, pol);
  Eigen::MatrixXd ref = orc::joint_kernel(mdp, pol);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      s += p(i, j);
      EXPECT_NEAR(p(i, j), ref(i, j), 1e-15);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(JointTransition, RatioTraceReproducesTargetKernel) {
  std::mt19937_64 rng(4);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 3});
  Policy pi = fx::random_policy(5, 3, rng);
  Policy mu = fx::random_policy(5, 3, rng, 0.05);
  Vec c(mdp.n_pairs());
  for (int i = 0; i < mdp.n_pairs(); ++i) c[i] = pi.probs()[i] / mu.probs()[i];
  Matrix a = joint_transition_matrix(mdp, mu, c);
  Matrix b = joint_transition_matrix(mdp, pi);
  EXPECT_LT(max_abs_diff(a.data(), b.data()), 1e-15);
}

TEST(JointTransition, RejectsBadTrace) {
  TabularMdp mdp = two_cycle(0.5);
  EXPECT_THROW(joint_transition_matrix(mdp, Policy::uniform(2, 1), Vec{1.0, -0.1}), std::invalid_argument);
  EXPECT_THROW(joint_transition_matrix(mdp, Policy::uniform(2, 1), Vec{1.0}), std::invalid_argument);
  EXPECT_THROW(joint_transition_matrix(mdp, Policy::uniform(3, 1)), std::invalid_argument);
}

TEST(ExactQ, GeometricSeriesAndZeroRewards) {
  QFunction q = exact_q(absorbing_one(1.0, 0.9), Policy::uniform(1, 1));
  EXPECT_NEAR(q[0], 10.0, 1e-12);
  std::mt19937_64 rng(5);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 4, .n_actions = 2});
  TabularMdp zero(4, 2, mdp.transitions(), Vec(8, 0.0), Vec(8, 0.0), 0.9);
  EXPECT_LT(max_abs(exact_q(zero, Policy::uniform(4, 2)).values()), 1e-15);
}

TEST(ExactQ, MatchesEigenSolveAndIgnoresNoise) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = fx::random_mdp(rng, {.n_states = 6, .n_actions = 3, .discount = 0.95});
    Policy pi = fx::random_policy(6, 3, rng);
    QFunction q = exact_q(mdp, pi);
    Eigen::VectorXd ref = orc::exact_q(mdp, pi);
    for (int i = 0; i < mdp.n_pairs(); ++i) EXPECT_NEAR(q[i], ref(i), 1e-10);
    EXPECT_LT(orc::bellman_error(mdp, pi, q.values()).cwiseAbs().maxCoeff(), 1e-10);
    TabularMdp noisy(6, 3, mdp.transitions(), mdp.mean_rewards(), Vec(18, 2.0), 0.95);
    EXPECT_LT(max_abs_diff(exact_q(noisy, pi).values(), q.values()), 1e-15);
  }
}

TEST(ExactQ, ChainValueMatchesMonteCarloReturns) {
  Benchmark b = build_chain(ChainSpec{});
  QFunction q = exact_q(b.mdp, b.target);
  const int n = 100000;
  std::mt19937_64 rng(77);
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    Trajectory t = sample_trajectory(b.mdp, b.target, {0, 0}, 1000, rng);
    double g = 0.0, disc = 1.0;
    for (const Step& s : t.steps) {
      g += disc * s.reward;
      disc *= b.mdp.discount();
    }
    sum += g;
    sum2 += g * g;
  }
  double mean = sum / n;
  double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
  EXPECT_NEAR(mean, q(0, 0), 3.0 * se);
  EXPECT_NEAR(q(0, 0), std::pow(0.95, 9), 1e-12);
}

TEST(Visitation, AbsorbingAndTwoCycle) {
  StateActionDist d = discounted_visitation(absorbing_one(0.0, 0.7), Policy::uniform(1, 1), {0, 0});
  EXPECT_NEAR(d.probs[0], 1.0, 1e-12);
  StateActionDist c = discounted_visitation(two_cycle(0.8), Policy::uniform(2, 1), {1, 0});
  // (1-g)/(1-g^2) on the start pair, g(1-g)/(1-g^2) on the other
  EXPECT_NEAR(c.probs[1], 0.2 / 0.36, 1e-12);
  EXPECT_NEAR(c.probs[0], 0.16 / 0.36, 1e-12);
  EXPECT_THROW(discounted_visitation(two_cycle(0.8), Policy::uniform(2, 1), {2, 0}), std::out_of_range);
}

TEST(Visitation, ProbabilityVectorSatisfyingBalance) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 2, .discount = 0.9});
    Policy mu = fx::random_policy(5, 2, rng);
    Matrix pt = joint_transition_matrix(mdp, mu).transposed();
    for (int i = 0; i < mdp.n_pairs(); ++i) {
      StateActionDist d = discounted_visitation(mdp, mu, mdp.pair(i));
      double s = 0.0;
      for (double v : d.probs) {
        EXPECT_GE(v, -1e-15);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-10);
      Vec bal = matvec(pt, d.probs);
      double res = 0.0;
      for (int j = 0; j < mdp.n_pairs(); ++j)
        res += std::fabs((j == i ? 1 - mdp.discount() : 0.0) + mdp.discount() * bal[j] - d.probs[j]);
      EXPECT_LT(res, 1e-10);
      Eigen::VectorXd ref = orc::visitation_row(mdp, mu, mdp.pair(i));
      for (int j = 0; j < mdp.n_pairs(); ++j) EXPECT_NEAR(d.probs[j], ref(j), 1e-10);
    }
  }
}

TEST(Visitation, ChainMatchesMonteCarloOccupancy) {
  Benchmark b = build_chain(ChainSpec{});
  const TabularMdp& mdp = b.mdp;
  StateActionDist d = discounted_visitation(mdp, b.behavior, {0, 1});
  // Sample (x_tau, a_tau) with tau geometric, walking through the terminal self-loop.
  const int n = 100000;
  std::mt19937_64 rng(99);
  std::geometric_distribution<int> tau(1.0 - mdp.discount());
  std::vector<long long> counts(mdp.n_pairs(), 0);
  for (int k = 0; k < n; ++k) {
    int t = tau(rng);
    int x = 0, a = 1;
    for (int s = 0; s < t; ++s) {
      x = sample_next_state(mdp, x, a, rng);
      a = b.behavior.sample(x, rng);
    }
    ++counts[mdp.index(x, a)];
  }
  for (int j = 0; j < mdp.n_pairs(); ++j) {
    double p = static_cast<double>(counts[j]) / n;
    double se = std::sqrt(std::max(d.probs[j] * (1 - d.probs[j]), 1e-12) / n);
    EXPECT_NEAR(p, d.probs[j], 3.5 * se + 1e-12) << "pair " << j;
  }
}

TEST(BellmanError, FixedPointZeroAndRewardsAtZeroQ) {
  std::mt19937_64 rng(10);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 3});
  Policy pi = fx::random_policy(5, 3, rng);
  EXPECT_LT(max_abs(bellman_error_vector(mdp, pi, exact_q(mdp, pi))), 1e-9);
  Vec e0 = bellman_error_vector(mdp, pi, QFunction::zeros(5, 3));
  EXPECT_LT(max_abs_diff(e0, mdp.mean_rewards()), 1e-15);
  QFunction q = fx::random_q(5, 3, rng);
  Vec e = bellman_error_vector(mdp, pi, q);
  Eigen::VectorXd ref = orc::bellman_error(mdp, pi, q.values());
  for (int i = 0; i < mdp.n_pairs(); ++i) EXPECT_NEAR(e[i], ref(i), 1e-13);
}

TEST(SampleTrajectory, DeterministicChainVisitsInOrder) {
  ChainSpec spec;
  spec.noise_std = 0.0;
  Benchmark b = build_chain(spec);
  Trajectory t = sample_trajectory(b.mdp, b.behavior, {0, 3}, 100, 12345);
  ASSERT_EQ(t.length(), 10u);
  for (int s = 0; s < 10; ++s) EXPECT_EQ(t.steps[s].state, s);
  EXPECT_TRUE(t.terminated);
  EXPECT_EQ(t.final_state, 10);
  for (const Step& s : t.steps) EXPECT_EQ(s.reward, b.mdp.mean_reward(s.state, s.action));
}

TEST(SampleTrajectory, SeedDeterminismAndTruncation) {
  std::mt19937_64 rng(11);
  TabularMdp mdp = fx::random_mdp(rng, {.n_states = 5, .n_actions = 2, .noise_std = 0.5});
  Policy mu = Policy::uniform(5, 2);
  Trajectory a = sample_trajectory(mdp, mu, {1, 1}, 50, 42);
  Trajectory b = sample_trajectory(mdp, mu, {1, 1}, 50, 42);
  ASSERT_EQ(a.length(), 50u);
  EXPECT_FALSE(a.terminated);
  for (std::size_t t = 0; t < a.length(); ++t) {
    EXPECT_EQ(a.steps[t].state, b.steps[t].state);
    EXPECT_EQ(a.steps[t].action, b.steps[t].action);
    EXPECT_EQ(a.steps[t].reward, b.steps[t].reward);
    EXPECT_GT(mdp.transition(a.steps[t].state, a.steps[t].action, a.state_after(t)), 0.0);
  }
  EXPECT_EQ(a.steps[0].state, 1);
  EXPECT_EQ(a.steps[0].action, 1);
  EXPECT_THROW(sample_trajectory(mdp, mu, {0, 0}, 0, 1), std::invalid_argument);
}

TEST(Horizon, ToleranceTruncation) {
  EXPECT_EQ(horizon_for_tolerance(0.0), 1);
  int h = horizon_for_tolerance(0.9, 1e-12);
  EXPECT_GE(std::pow(0.9, h - 1), 1e-12);
  EXPECT_LT(std::pow(0.9, h), 1e-12);
}
