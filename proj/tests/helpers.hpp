#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sparho/dynamics.hpp"
#include "sparho/environments.hpp"
#include "sparho/mdp.hpp"
#include "sparho/rng.hpp"

namespace sparho::test {

/// Random soft distribution via softmax of N(0, 1).
inline Eigen::VectorXd random_distribution(int n, Rng& rng) {
  return softmax_gaussian(n, 1.0, rng);
}

/// Random MDP. With `episodic`, the last state is terminal and every
/// (state, action) has at least `term_prob` mass on it.
inline TabularMDP random_mdp(int n_states, int n_actions, double gamma, bool episodic, Rng& rng,
                             double term_prob = 0.3) {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.terminal.assign(static_cast<std::size_t>(n_states), 0);
  if (episodic) mdp.terminal[static_cast<std::size_t>(n_states - 1)] = 1;
  mdp.transition.assign(static_cast<std::size_t>(n_states),
                        Eigen::MatrixXd::Zero(n_actions, n_states));
  mdp.reward.assign(static_cast<std::size_t>(n_states),
                    Eigen::MatrixXd::Zero(n_actions, n_states));
  for (int s = 0; s < n_states; ++s) {
    if (mdp.is_terminal(s)) {
      for (int a = 0; a < n_actions; ++a) mdp.transition[static_cast<std::size_t>(s)](a, s) = 1.0;
      continue;
    }
    for (int a = 0; a < n_actions; ++a) {
      Eigen::VectorXd row(n_states);
      for (int s2 = 0; s2 < n_states; ++s2) row[s2] = -std::log(1.0 - rng.uniform());
      row /= row.sum();
      if (episodic) {
        row *= 1.0 - term_prob;
        row[n_states - 1] += term_prob;
      }
      mdp.transition[static_cast<std::size_t>(s)].row(a) = row.transpose();
      for (int s2 = 0; s2 < n_states; ++s2)
        mdp.reward[static_cast<std::size_t>(s)](a, s2) = rng.normal();
    }
  }
  mdp.start = Eigen::VectorXd::Zero(n_states);
  int non_terminal = 0;
  for (int s = 0; s < n_states; ++s) non_terminal += mdp.is_terminal(s) ? 0 : 1;
  for (int s = 0; s < n_states; ++s)
    if (!mdp.is_terminal(s)) mdp.start[s] = 1.0 / non_terminal;
  mdp.validate();
  return mdp;
}

inline PolicyTable random_policy(const TabularMDP& mdp, Rng& rng) {
  PolicyTable p(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    p.row(s) = random_distribution(mdp.n_actions, rng).transpose();
  return p;
}

/// q_pi by truncated Neumann series with a rigorous tail bound; independent
/// of the dense linear solve. Requires an episodic MDP (or gamma < 1).
inline Eigen::MatrixXd enumerate_action_values(const TabularMDP& mdp, const PolicyTable& pi,
                                               double tol = 1e-10) {
  const StateActionOperator op = make_state_action_operator(mdp, pi);

  // Restrict to non-terminal pairs so that the alive mass decays.
  std::vector<Eigen::Index> nt;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.is_terminal(s))
      for (int a = 0; a < mdp.n_actions; ++a) nt.push_back(op.pair(s, a));
  Eigen::MatrixXd P(static_cast<Eigen::Index>(nt.size()), static_cast<Eigen::Index>(nt.size()));
  Eigen::VectorXd rbar(static_cast<Eigen::Index>(nt.size()));
  for (std::size_t i = 0; i < nt.size(); ++i) {
    rbar[static_cast<Eigen::Index>(i)] = op.expected_reward[nt[i]];
    for (std::size_t j = 0; j < nt.size(); ++j)
      P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = op.transition(nt[i], nt[j]);
  }
  P *= mdp.gamma;

  const double r_max = rbar.cwiseAbs().maxCoeff();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nt.size()));
  Eigen::VectorXd term = rbar;
  // After each block of `block` steps the alive mass shrinks by at least
  // `shrink`; the remaining series is bounded by a geometric sum.
  const int block = mdp.n_states * mdp.n_actions + 4;
  for (long k = 0; k < 1000000; ++k) {
    q += term;
    term = P * term;
    if (k % block == 0) {
      Eigen::VectorXd alive = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(nt.size()));
      Eigen::MatrixXd Pk = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nt.size()),
                                                     static_cast<Eigen::Index>(nt.size()));
      for (int b = 0; b < block; ++b) Pk = P * Pk;
      const double shrink = Pk.cwiseAbs().rowwise().sum().maxCoeff();
      const double head = term.cwiseAbs().maxCoeff();
      if (shrink < 1.0) {
        const double tail = head * block / (1.0 - shrink) + head * block;
        if (tail * std::max(1.0, r_max) < tol) break;
      }
    }
  }

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (std::size_t i = 0; i < nt.size(); ++i) {
    const int s = static_cast<int>(nt[i]) / mdp.n_actions;
    const int a = static_cast<int>(nt[i]) % mdp.n_actions;
    table(s, a) = q[static_cast<Eigen::Index>(i)];
  }
  return table;
}

}  // namespace sparho::test
