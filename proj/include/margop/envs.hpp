#pragma once

#include "margop/mdp.hpp"

namespace margop {

struct ChainSpec {
  int n_actions = 5;
  int horizon = 10;  // non-terminal states; the terminal state is index `horizon`
  double off_policy_level = 0.0;  // beta: mu = beta*pi + (1-beta)*uniform
  double noise_std = 0.1;
  int optimal_action = 0;
  double discount = 0.95;

  void validate() const;  // throws std::invalid_argument naming the field
};

struct OpenWorldSpec {
  int side = 10;
  double discount = 0.95;

  void validate() const;
};

enum OpenWorldAction : int { kLeft = 0, kUp = 1, kRight = 2, kDown = 3 };

struct Benchmark {
  TabularMdp mdp;
  Policy target;
  Policy behavior;
  int start_state = 0;
};

// Every action moves one state right; leaving state T-1 enters the terminal
// state and pays N(1, sigma^2) for the optimal action and N(0, sigma^2) otherwise.
Benchmark build_chain(const ChainSpec& spec);

// side x side grid, state = row*side + col, start top-left, bottom-right goal
// is terminal and entering it pays 1. Moves into a wall leave the state
// unchanged. mu is uniform; pi splits evenly between down and right.
Benchmark build_open_world(const OpenWorldSpec& spec);

int open_world_state(int side, int row, int col);

}  // namespace margop
