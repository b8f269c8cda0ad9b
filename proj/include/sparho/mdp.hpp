#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sparho/rng.hpp"

namespace sparho {

/// Per-state action distributions; row s is the distribution over actions in
/// state s.
using PolicyTable = Eigen::MatrixXd;

/// Finite MDP with dense transition and reward tensors.
///
/// Terminal states self-loop with reward 0. gamma = 1 is only accepted for
/// episodic structure: a terminal state must exist and be reachable from
/// every non-terminal state through the transition support, which makes any
/// soft policy terminate with probability one.
struct TabularMDP {
  int n_states{0};
  int n_actions{0};
  double gamma{1.0};
  std::vector<Eigen::MatrixXd> transition;  // [s] is n_actions x n_states, rows P[s][a][.]
  std::vector<Eigen::MatrixXd> reward;      // [s] is n_actions x n_states
  std::vector<std::uint8_t> terminal;       // size n_states
  Eigen::VectorXd start;                    // start-state distribution

  bool is_terminal(int s) const { return terminal[static_cast<std::size_t>(s)] != 0; }
  int n_terminal() const;

  /// Throws std::invalid_argument when any structural invariant fails.
  void validate() const;
};

/// Checks that `policy` is row-stochastic over the MDP's non-terminal states
/// (and soft everywhere when `require_soft`).
void validate_policy(const TabularMDP& mdp, const PolicyTable& policy, bool require_soft);

struct Step {
  int state;
  int action;
  double reward;
  int next_state;
};

struct Trajectory {
  std::vector<Step> steps;
  bool terminated{false};
  bool truncated{false};
};

/// Samples one episode under `policy`. A terminal start state yields an empty
/// trajectory. Hitting `max_steps` before termination sets `truncated`.
Trajectory sample_episode(const TabularMDP& mdp, const PolicyTable& policy, Rng& rng,
                          long max_steps = 1000000);

}  // namespace sparho
