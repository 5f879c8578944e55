#include "margop/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop {
namespace {

std::string pair_str(int x, int a) {
  return "(" + std::to_string(x) + "," + std::to_string(a) + ")";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions, Vec transition, Vec mean_reward,
                       Vec reward_noise_std, double discount, std::vector<int> terminal_states)
    : n_states_(n_states),
      n_actions_(n_actions),
      transition_(std::move(transition)),
      mean_reward_(std::move(mean_reward)),
      reward_noise_std_(std::move(reward_noise_std)),
      discount_(discount),
      terminal_(static_cast<std::size_t>(std::max(n_states, 0)), 0),
      terminal_list_(std::move(terminal_states)) {
  require(n_states > 0 && n_actions > 0, "TabularMdp: need at least one state and one action");
  require(discount >= 0.0 && discount < 1.0, "TabularMdp: discount must lie in [0,1)");
  const std::size_t n_pairs = static_cast<std::size_t>(n_states) * n_actions;
  require(transition_.size() == n_pairs * n_states,
          "TabularMdp: transition tensor has " + std::to_string(transition_.size()) +
              " entries, expected " + std::to_string(n_pairs * n_states));
  require(mean_reward_.size() == n_pairs, "TabularMdp: mean_reward has wrong size");
  require(reward_noise_std_.size() == n_pairs, "TabularMdp: reward_noise_std has wrong size");
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      auto row = next_state_probs(x, a);
      double sum = 0.0;
      for (double p : row) {
        require(std::isfinite(p) && p >= 0.0,
                "TabularMdp: negative or non-finite probability at " + pair_str(x, a));
        sum += p;
      }
      require(std::fabs(sum - 1.0) <= 1e-12,
              "TabularMdp: transition row " + pair_str(x, a) + " sums to " + std::to_string(sum));
      require(std::isfinite(this->mean_reward(x, a)), "TabularMdp: non-finite reward at " + pair_str(x, a));
      require(std::isfinite(this->reward_noise_std(x, a)) && this->reward_noise_std(x, a) >= 0.0,
              "TabularMdp: invalid reward noise at " + pair_str(x, a));
    }
  }
  std::sort(terminal_list_.begin(), terminal_list_.end());
  terminal_list_.erase(std::unique(terminal_list_.begin(), terminal_list_.end()), terminal_list_.end());
  for (int t : terminal_list_) {
    require(t >= 0 && t < n_states, "TabularMdp: terminal state " + std::to_string(t) + " out of range");
    terminal_[t] = 1;
    for (int a = 0; a < n_actions; ++a) {
      require(next_state_probs(t, a)[t] == 1.0,
              "TabularMdp: terminal state " + std::to_string(t) + " must be absorbing");
      require(this->mean_reward(t, a) == 0.0 && this->reward_noise_std(t, a) == 0.0,
              "TabularMdp: terminal state " + std::to_string(t) + " must have zero reward");
    }
  }
}

TabularMdp TabularMdp::with_discount(double discount) const {
  return TabularMdp(n_states_, n_actions_, transition_, mean_reward_, reward_noise_std_, discount,
                    terminal_list_);
}

void TabularMdp::check_pair(SaPair p) const {
  if (p.state < 0 || p.state >= n_states_ || p.action < 0 || p.action >= n_actions_) {
    throw std::out_of_range("state-action pair " + pair_str(p.state, p.action) + " out of range");
  }
}

Policy::Policy(int n_states, int n_actions, Vec probs, double tolerance)
    : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
  require(n_states > 0 && n_actions > 0, "Policy: need at least one state and one action");
  require(probs_.size() == static_cast<std::size_t>(n_states) * n_actions,
          "Policy: probability table has wrong size");
  for (int x = 0; x < n_states; ++x) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      double p = (*this)(x, a);
      require(std::isfinite(p) && p >= 0.0, "Policy: invalid probability at " + pair_str(x, a));
      sum += p;
    }
    require(std::fabs(sum - 1.0) <= tolerance,
            "Policy: row " + std::to_string(x) + " sums to " + std::to_string(sum));
  }
}

Policy Policy::uniform(int n_states, int n_actions) {
  return Policy(n_states, n_actions,
                Vec(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions));
}

Policy Policy::deterministic(int n_states, int n_actions, const std::vector<int>& actions) {
  require(actions.size() == static_cast<std::size_t>(n_states), "Policy: one action per state required");
  Vec probs(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (int x = 0; x < n_states; ++x) {
    require(actions[x] >= 0 && actions[x] < n_actions, "Policy: action out of range");
    probs[static_cast<std::size_t>(x) * n_actions + actions[x]] = 1.0;
  }
  return Policy(n_states, n_actions, std::move(probs));
}

int Policy::sample(int x, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  auto p = row(x);
  int last_positive = 0;
  for (int a = 0; a < n_actions_; ++a) {
    if (p[a] <= 0.0) continue;
    last_positive = a;
    r -= p[a];
    if (r < 0.0) return a;
  }
  return last_positive;
}

void check_compatible(const TabularMdp& mdp, const Policy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
}

QFunction::QFunction(int n_states, int n_actions, Vec values)
    : n_states_(n_states), n_actions_(n_actions), values_(std::move(values)) {
  require(values_.size() == static_cast<std::size_t>(n_states) * n_actions,
          "QFunction: value table has wrong size");
  for (double v : values_) require(std::isfinite(v), "QFunction: non-finite value");
}

QFunction QFunction::zeros(int n_states, int n_actions) {
  return QFunction(n_states, n_actions, Vec(static_cast<std::size_t>(n_states) * n_actions, 0.0));
}

double QFunction::expected(int x, const Policy& policy) const noexcept {
  return simd::dot(policy.row(x),
                   std::span<const double>(values_.data() + static_cast<std::size_t>(x) * n_actions_,
                                           static_cast<std::size_t>(n_actions_)));
}

void check_compatible(const TabularMdp& mdp, const QFunction& q) {
  if (q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions()) {
    throw std::invalid_argument("Q-function shape does not match the MDP");
  }
}

void check_zero_on_terminals(const TabularMdp& mdp, const QFunction& q, double tolerance) {
  for (int t : mdp.terminal_states()) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (std::fabs(q(t, a)) > tolerance) {
        throw std::invalid_argument("Q-function is nonzero on terminal state " + std::to_string(t));
      }
    }
  }
}

Matrix joint_transition_matrix(const TabularMdp& mdp, const Policy& policy,
                               std::span<const double> trace) {
  check_compatible(mdp, policy);
  const int S = mdp.n_states();
  const int A = mdp.n_actions();
  const int n = mdp.n_pairs();
  if (!trace.empty() && trace.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("joint_transition_matrix: trace has wrong size");
  }
  for (double c : trace) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("joint_transition_matrix: trace coefficients must be finite and >= 0");
    }
  }
  Vec weight(n);
  for (int i = 0; i < n; ++i) weight[i] = policy.probs()[i] * (trace.empty() ? 1.0 : trace[i]);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    SaPair p = mdp.pair(i);
    auto next = mdp.next_state_probs(p.state, p.action);
    auto out = m.row(i);
    for (int y = 0; y < S; ++y) {
      if (next[y] == 0.0) continue;
      for (int b = 0; b < A; ++b) out[y * A + b] = next[y] * weight[y * A + b];
    }
  }
  return m;
}

Matrix visitation_matrix(const TabularMdp& mdp, const Policy& behavior) {
  const double g = mdp.discount();
  Matrix inv = LuDecomposition(identity_minus(joint_transition_matrix(mdp, behavior), g)).inverse();
  simd::scale(1.0 - g, inv.data());
  return inv;
}

StateActionDist discounted_visitation(const TabularMdp& mdp, const Policy& behavior, SaPair start) {
  mdp.check_pair(start);
  const double g = mdp.discount();
  LuDecomposition lu(identity_minus(joint_transition_matrix(mdp, behavior), g));
  Vec e(mdp.n_pairs(), 0.0);
  e[mdp.index(start)] = 1.0 - g;
  // Row of (I - gP)^{-1} is the solution of (I - gP)^T d = e.
  return {start, lu.solve_transposed(e)};
}

QFunction exact_q(const TabularMdp& mdp, const Policy& target) {
  LuDecomposition lu(identity_minus(joint_transition_matrix(mdp, target), mdp.discount()));
  return QFunction(mdp.n_states(), mdp.n_actions(), lu.solve(mdp.mean_rewards()));
}

ValueFunction exact_v(const TabularMdp& mdp, const Policy& target) {
  QFunction q = exact_q(mdp, target);
  Vec v(mdp.n_states());
  for (int x = 0; x < mdp.n_states(); ++x) v[x] = q.expected(x, target);
  return {std::move(v)};
}

Vec bellman_error_vector(const TabularMdp& mdp, const Policy& target, const QFunction& q) {
  check_compatible(mdp, target);
  check_compatible(mdp, q);
  const double g = mdp.discount();
  Vec vpi(mdp.n_states());
  for (int x = 0; x < mdp.n_states(); ++x) vpi[x] = q.expected(x, target);
  Vec delta(mdp.n_pairs());
  for (int i = 0; i < mdp.n_pairs(); ++i) {
    SaPair p = mdp.pair(i);
    delta[i] = mdp.mean_rewards()[i] + g * simd::dot(mdp.next_state_probs(p.state, p.action), vpi) - q[i];
  }
  return delta;
}

int horizon_for_tolerance(double discount, double tol) {
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("horizon: discount must lie in [0,1)");
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("horizon: tolerance must lie in (0,1)");
  if (discount == 0.0) return 1;
  // Largest t with gamma^t >= tol, plus one for step 0.
  return static_cast<int>(std::floor(std::log(tol) / std::log(discount))) + 1;
}

int sample_next_state(const TabularMdp& mdp, int x, int a, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  auto p = mdp.next_state_probs(x, a);
  int last_positive = 0;
  for (int y = 0; y < mdp.n_states(); ++y) {
    if (p[y] <= 0.0) continue;
    last_positive = y;
    r -= p[y];
    if (r < 0.0) return y;
  }
  return last_positive;
}

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, SaPair start,
                             int max_steps, std::mt19937_64& rng) {
  check_compatible(mdp, behavior);
  mdp.check_pair(start);
  if (max_steps < 1) throw std::invalid_argument("sample_trajectory: max_steps must be positive");
  Trajectory traj;
  traj.steps.reserve(std::min(max_steps, 4096));
  std::normal_distribution<double> noise(0.0, 1.0);
  int x = start.state;
  int a = start.action;
  if (mdp.is_terminal(x)) {
    traj.steps.push_back({x, a, 0.0});
    traj.final_state = x;
    traj.terminated = true;
    return traj;
  }
  for (int t = 0; t < max_steps; ++t) {
    double r = mdp.mean_reward(x, a);
    double sd = mdp.reward_noise_std(x, a);
    if (sd > 0.0) r += sd * noise(rng);
    traj.steps.push_back({x, a, r});
    x = sample_next_state(mdp, x, a, rng);
    if (mdp.is_terminal(x)) {
      traj.final_state = x;
      traj.terminated = true;
      return traj;
    }
    if (t + 1 < max_steps) a = behavior.sample(x, rng);
  }
  traj.final_state = x;
  traj.terminated = false;
  return traj;
}

Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, SaPair start,
                             int max_steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_trajectory(mdp, behavior, start, max_steps, rng);
}

}  // namespace margop
