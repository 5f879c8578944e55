#include "margop/envs.hpp"

#include <stdexcept>
#include <string>

namespace margop {

void ChainSpec::validate() const {
  if (n_actions < 1) throw std::invalid_argument("chain.n_actions must be >= 1");
  if (horizon < 2) throw std::invalid_argument("chain.horizon must be >= 2");
  if (!(off_policy_level >= 0.0 && off_policy_level <= 1.0)) {
    throw std::invalid_argument("chain.off_policy_level must lie in [0,1]");
  }
  if (!(noise_std >= 0.0)) throw std::invalid_argument("chain.noise_std must be >= 0");
  if (optimal_action < 0 || optimal_action >= n_actions) {
    throw std::invalid_argument("chain.optimal_action must lie in [0, n_actions)");
  }
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("chain.discount must lie in [0,1)");
}

void OpenWorldSpec::validate() const {
  if (side < 2) throw std::invalid_argument("openworld.side must be >= 2");
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("openworld.discount must lie in [0,1)");
}

Benchmark build_chain(const ChainSpec& spec) {
  spec.validate();
  const int T = spec.horizon;
  const int S = T + 1;
  const int A = spec.n_actions;
  const std::size_t n = static_cast<std::size_t>(S) * A;
  Vec p(n * S, 0.0), r(n, 0.0), sd(n, 0.0);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < A; ++a) {
      const std::size_t i = static_cast<std::size_t>(x) * A + a;
      p[i * S + (x < T ? x + 1 : T)] = 1.0;
      if (x == T - 1) {
        sd[i] = spec.noise_std;
        if (a == spec.optimal_action) r[i] = 1.0;
      }
    }
  }
  TabularMdp mdp(S, A, std::move(p), std::move(r), std::move(sd), spec.discount, {T});
  Policy target = Policy::deterministic(S, A, std::vector<int>(S, spec.optimal_action));
  Vec mu(n);
  for (std::size_t i = 0; i < n; ++i) {
    mu[i] = spec.off_policy_level * target.probs()[i] + (1.0 - spec.off_policy_level) / A;
  }
  return {std::move(mdp), std::move(target), Policy(S, A, std::move(mu)), 0};
}

int open_world_state(int side, int row, int col) { return row * side + col; }

Benchmark build_open_world(const OpenWorldSpec& spec) {
  spec.validate();
  const int n = spec.side;
  const int S = n * n;
  const int A = 4;
  const int goal = S - 1;
  const std::size_t np = static_cast<std::size_t>(S) * A;
  Vec p(np * S, 0.0), r(np, 0.0), sd(np, 0.0);
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const int x = open_world_state(n, row, col);
      for (int a = 0; a < A; ++a) {
        const std::size_t i = static_cast<std::size_t>(x) * A + a;
        int nr = row, nc = col;
        if (x != goal) {
          if (a == kLeft && col > 0) --nc;
          if (a == kUp && row > 0) --nr;
          if (a == kRight && col < n - 1) ++nc;
          if (a == kDown && row < n - 1) ++nr;
        }
        const int y = open_world_state(n, nr, nc);
        p[i * S + y] = 1.0;
        if (x != goal && y == goal) r[i] = 1.0;
      }
    }
  }
  TabularMdp mdp(S, A, std::move(p), std::move(r), std::move(sd), spec.discount, {goal});
  Vec pi(np, 0.0);
  for (int x = 0; x < S; ++x) {
    pi[static_cast<std::size_t>(x) * A + kRight] = 0.5;
    pi[static_cast<std::size_t>(x) * A + kDown] = 0.5;
  }
  return {std::move(mdp), Policy(S, A, std::move(pi)), Policy::uniform(S, A), 0};
}

}  // namespace margop
