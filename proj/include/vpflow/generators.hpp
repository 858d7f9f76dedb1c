#pragma once

#include <cstdint>

#include "vpflow/mdp.hpp"

namespace vpflow {

/// Grid actions, in table order.
enum GridAction : std::size_t { kStay = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };

/// W x H grid, state = y * W + x, five actions (stay, up, down, left, right),
/// moves into a wall leave the agent in place. Goals are the distinct
/// corners; r(s;g) = 1 iff s is goal g, and `stay` makes the goal absorbing.
/// rho and p are uniform.
GoalMdp gridworld(std::size_t width, std::size_t height, double discount);

/// As gridworld, but with probability p_slip the move is replaced by one drawn
/// uniformly from all five actions.
GoalMdp noisy_gridworld(std::size_t width, std::size_t height, double p_slip, double discount);

/// n states on a line with actions (left, right, stay). Each move succeeds
/// with a state-specific probability drawn from [0.6, 0.95] and otherwise
/// goes the opposite way; the walls reflect. A single goal at the right end,
/// rho uniform.
GoalMdp random_chain(std::size_t n, double discount, std::uint64_t seed);

struct RandomMdpOptions {
  std::size_t n_states = 5;
  std::size_t n_actions = 2;
  std::size_t n_goals = 2;
  double discount = 0.9;
  /// Point-mass transitions to uniformly drawn successors instead of
  /// Dirichlet(1) rows.
  bool deterministic = false;
};

/// Dirichlet transition rows, rewards uniform on [0,1], Dirichlet rho and p.
GoalMdp random_mdp(const RandomMdpOptions& options, std::uint64_t seed);

/// (1 - epsilon) times a greedy policy on shortest-path distance to the
/// goal states of each goal (the states of maximal positive reward), with
/// ties split evenly, plus epsilon times uniform. States that cannot reach
/// the goal act uniformly.
Policy shortest_path_behavior(const GoalMdp& mdp, double epsilon);

/// Dirichlet(1) rows mixed with epsilon times uniform.
Policy random_behavior(const GoalMdp& mdp, double epsilon, std::uint64_t seed);

}  // namespace vpflow
