#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "sparho/mdp.hpp"
#include "sparho/rng.hpp"

namespace sparho {

inline constexpr int kFeatureDim = 16;
inline constexpr int kFeatureOnes = 8;

/// One off-policy bandit problem: soft policies and fixed action values.
struct BanditInstance {
  Eigen::VectorXd mu;
  Eigen::VectorXd pi;
  Eigen::VectorXd q;
  double beta{0.0};
};

struct EnvWithPolicies {
  TabularMDP mdp;
  PolicyTable mu;
  PolicyTable pi;
};

/// softmax(z) for a vector of independent N(0, beta) draws.
Eigen::VectorXd softmax_gaussian(int n, double beta, Rng& rng);

/// Random bandit: mu and pi are softmax of N(0, beta) vectors, q is
/// beta + N(0, beta). Draw order is mu, pi, q.
BanditInstance generate_bandit(int n_actions, double beta, Rng& rng);

/// Layered deterministic chain: one initial state, `depth` layers of `width`
/// states, one terminal. Action a from any state in layer i lands on node a
/// of layer i + 1 (the terminal after the last layer) with reward
/// (1 + a) / width. gamma = 1. Per-state policies are drawn independently by
/// the softmax procedure (mu then pi, in state-id order).
EnvWithPolicies make_path_world(int width, int depth, double beta, Rng& rng);

enum class GridDirs { Four, Eight };

/// side x side grid, start at the center, terminals at the two opposite
/// corners (top-left and bottom-right). Moves that leave the grid keep the
/// agent in place; every step costs -1; gamma = 1.
///
/// Action order: Four = N, E, S, W; Eight = N, NE, E, SE, S, SW, W, NW.
///
/// Both policies put probability (1 - eps) + eps/|A| on the preferred action
/// and eps/|A| elsewhere. `preferred` maps state id to action id; pass an
/// empty function to draw a single action id from `rng` and use it in every
/// state.
EnvWithPolicies make_grid_world(int side, GridDirs dirs, double eps_pi, double eps_mu,
                                const std::function<int(int)>& preferred, Rng& rng);

/// Binary feature rows (n_states x 16), each with exactly 8 ones, drawn
/// uniformly over the 16-choose-8 patterns.
using FeatureMap = Eigen::MatrixXd;
FeatureMap make_random_features(int n_states, Rng& rng);

/// Builds a TabularMDP from its JSON description and validates it.
///
/// Required fields: n_states, n_actions, gamma, terminal (list of state ids),
/// transition and reward (dense [s][a][s'] arrays). Optional: start
/// (distribution over states; default uniform over non-terminal states),
/// mu and pi ([s][a] row-stochastic arrays, consumed by the dynamics tools).
TabularMDP make_custom_mdp(const std::string& json_text);

/// Reads `path` and forwards to make_custom_mdp.
TabularMDP load_mdp_file(const std::string& path);

/// Returns the mu/pi tables embedded in an MDP spec file, if present.
struct CustomMdpPolicies {
  bool has_mu{false};
  bool has_pi{false};
  PolicyTable mu;
  PolicyTable pi;
};
CustomMdpPolicies load_mdp_policies(const std::string& path, const TabularMDP& mdp);

}  // namespace sparho
