#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "margop/linalg/matrix.hpp"

namespace margop {

struct SaPair {
  int state = 0;
  int action = 0;
  friend bool operator==(const SaPair&, const SaPair&) = default;
};

// Finite discounted MDP. State-action pairs are flattened as x * |A| + a.
// Terminal states are absorbing with zero reward, and values on them are zero.
class TabularMdp {
 public:
  // transition: |S|*|A|*|S| entries, row (x,a) holds p(.|x,a).
  // mean_reward, reward_noise_std: |S|*|A| entries.
  // Throws std::invalid_argument on any inconsistency.
  TabularMdp(int n_states, int n_actions, Vec transition, Vec mean_reward, Vec reward_noise_std,
             double discount, std::vector<int> terminal_states = {});

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  int n_pairs() const noexcept { return n_states_ * n_actions_; }
  double discount() const noexcept { return discount_; }

  int index(int x, int a) const noexcept { return x * n_actions_ + a; }
  int index(SaPair p) const noexcept { return index(p.state, p.action); }
  SaPair pair(int flat) const noexcept { return {flat / n_actions_, flat % n_actions_}; }

  std::span<const double> next_state_probs(int x, int a) const noexcept {
    return {transition_.data() + static_cast<std::size_t>(index(x, a)) * n_states_,
            static_cast<std::size_t>(n_states_)};
  }
  double transition(int x, int a, int next) const noexcept { return next_state_probs(x, a)[next]; }
  double mean_reward(int x, int a) const noexcept { return mean_reward_[index(x, a)]; }
  double reward_noise_std(int x, int a) const noexcept { return reward_noise_std_[index(x, a)]; }
  const Vec& mean_rewards() const noexcept { return mean_reward_; }
  const Vec& transitions() const noexcept { return transition_; }
  bool is_terminal(int x) const noexcept { return terminal_[x] != 0; }
  const std::vector<int>& terminal_states() const noexcept { return terminal_list_; }

  TabularMdp with_discount(double discount) const;

  void check_pair(SaPair p) const;  // throws std::out_of_range

 private:
  int n_states_;
  int n_actions_;
  Vec transition_;
  Vec mean_reward_;
  Vec reward_noise_std_;
  double discount_;
  std::vector<char> terminal_;
  std::vector<int> terminal_list_;
};

// Row-stochastic |S| x |A| action distribution.
class Policy {
 public:
  Policy(int n_states, int n_actions, Vec probs, double tolerance = 1e-12);
  static Policy uniform(int n_states, int n_actions);
  static Policy deterministic(int n_states, int n_actions, const std::vector<int>& actions);

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  double operator()(int x, int a) const noexcept { return probs_[x * n_actions_ + a]; }
  std::span<const double> row(int x) const noexcept {
    return {probs_.data() + static_cast<std::size_t>(x) * n_actions_,
            static_cast<std::size_t>(n_actions_)};
  }
  const Vec& probs() const noexcept { return probs_; }

  int sample(int x, std::mt19937_64& rng) const;

 private:
  int n_states_;
  int n_actions_;
  Vec probs_;
};

void check_compatible(const TabularMdp& mdp, const Policy& policy);

class QFunction {
 public:
  QFunction() = default;
  QFunction(int n_states, int n_actions, Vec values);  // throws on size mismatch or non-finite
  static QFunction zeros(int n_states, int n_actions);

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  double operator()(int x, int a) const noexcept { return values_[x * n_actions_ + a]; }
  double& operator()(int x, int a) noexcept { return values_[x * n_actions_ + a]; }
  double operator[](int flat) const noexcept { return values_[flat]; }
  double& operator[](int flat) noexcept { return values_[flat]; }
  const Vec& values() const noexcept { return values_; }
  Vec& values() noexcept { return values_; }

  // sum_a pi(a|x) Q(x,a)
  double expected(int x, const Policy& policy) const noexcept;

 private:
  int n_states_ = 0;
  int n_actions_ = 0;
  Vec values_;
};

void check_compatible(const TabularMdp& mdp, const QFunction& q);

// Throws if q is nonzero on a terminal state.
void check_zero_on_terminals(const TabularMdp& mdp, const QFunction& q, double tolerance = 1e-12);

struct ValueFunction {
  Vec values;
};

// Discounted state-action occupancy from a single start pair; sums to 1.
struct StateActionDist {
  SaPair start;
  Vec probs;
};

struct Step {
  int state;
  int action;
  double reward;
};

// Steps (x_t, a_t, r_t) for t < length, then the state reached after the last
// step. terminated is true when final_state is terminal. A rollout started on a
// terminal state holds a single zero-reward step.
struct Trajectory {
  std::vector<Step> steps;
  int final_state = 0;
  bool terminated = false;

  std::size_t length() const noexcept { return steps.size(); }
  int state_after(std::size_t t) const noexcept {
    return t + 1 < steps.size() ? steps[t + 1].state : final_state;
  }
};

// P^{c mu}((x,a),(x',a')) = p(x'|x,a) mu(a'|x') c(x',a'). Empty trace means c = 1.
Matrix joint_transition_matrix(const TabularMdp& mdp, const Policy& policy,
                               std::span<const double> trace = {});

// (1-gamma)(I - gamma P^mu)^{-1}; row i is the discounted occupancy from pair i.
Matrix visitation_matrix(const TabularMdp& mdp, const Policy& behavior);

StateActionDist discounted_visitation(const TabularMdp& mdp, const Policy& behavior, SaPair start);

QFunction exact_q(const TabularMdp& mdp, const Policy& target);
ValueFunction exact_v(const TabularMdp& mdp, const Policy& target);

// r + gamma P^pi Q - Q
Vec bellman_error_vector(const TabularMdp& mdp, const Policy& target, const QFunction& q);

// Number of steps t with gamma^t >= tol, the truncation used for
// non-terminating rollouts.
int horizon_for_tolerance(double discount, double tol = 1e-12);

// Rolls out from start under behavior for up to max_steps steps, stopping
// early at a terminal state. Rewards are mean + noise_std * N(0,1).
Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, SaPair start,
                             int max_steps, std::mt19937_64& rng);
Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, SaPair start,
                             int max_steps, std::uint64_t seed);

int sample_next_state(const TabularMdp& mdp, int x, int a, std::mt19937_64& rng);

}  // namespace margop
