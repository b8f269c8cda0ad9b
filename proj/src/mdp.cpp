#include "sparho/mdp.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>

namespace sparho {

namespace {
constexpr double kRowSumTol = 1e-12;
}

int TabularMDP::n_terminal() const {
  int count = 0;
  for (int s = 0; s < n_states; ++s) count += is_terminal(s) ? 1 : 0;
  return count;
}

void TabularMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw std::invalid_argument("TabularMDP: n_states and n_actions must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("TabularMDP: gamma outside [0, 1]");
  if (static_cast<int>(transition.size()) != n_states ||
      static_cast<int>(reward.size()) != n_states ||
      static_cast<int>(terminal.size()) != n_states)
    throw std::invalid_argument("TabularMDP: tensor sizes disagree with n_states");
  if (start.size() != n_states) throw std::invalid_argument("TabularMDP: start distribution size");
  if ((start.array() < 0).any() || std::abs(start.sum() - 1.0) > kRowSumTol)
    throw std::invalid_argument("TabularMDP: start is not a distribution");

  for (int s = 0; s < n_states; ++s) {
    const auto& p = transition[static_cast<std::size_t>(s)];
    const auto& r = reward[static_cast<std::size_t>(s)];
    if (p.rows() != n_actions || p.cols() != n_states || r.rows() != n_actions ||
        r.cols() != n_states)
      throw std::invalid_argument("TabularMDP: tensor shape mismatch at state " +
                                  std::to_string(s));
    if ((p.array() < 0).any())
      throw std::invalid_argument("TabularMDP: negative transition probability");
    for (int a = 0; a < n_actions; ++a) {
      if (std::abs(p.row(a).sum() - 1.0) > kRowSumTol)
        throw std::invalid_argument("TabularMDP: non-stochastic row at state " +
                                    std::to_string(s) + ", action " + std::to_string(a));
    }
    if (!r.allFinite()) throw std::invalid_argument("TabularMDP: non-finite reward");
    if (is_terminal(s)) {
      for (int a = 0; a < n_actions; ++a) {
        if (std::abs(p(a, s) - 1.0) > kRowSumTol || std::abs(r(a, s)) > 0.0)
          throw std::invalid_argument("TabularMDP: terminal state " + std::to_string(s) +
                                      " must self-loop with reward 0");
      }
    }
  }

  if (gamma == 1.0) {
    if (n_terminal() == 0)
      throw std::invalid_argument("TabularMDP: gamma = 1 requires a terminal state");
    // Backward reachability of the terminal set through the support graph.
    std::vector<std::uint8_t> reaches(static_cast<std::size_t>(n_states), 0);
    std::deque<int> frontier;
    for (int s = 0; s < n_states; ++s)
      if (is_terminal(s)) {
        reaches[static_cast<std::size_t>(s)] = 1;
        frontier.push_back(s);
      }
    while (!frontier.empty()) {
      const int t = frontier.front();
      frontier.pop_front();
      for (int s = 0; s < n_states; ++s) {
        if (reaches[static_cast<std::size_t>(s)]) continue;
        if ((transition[static_cast<std::size_t>(s)].col(t).array() > 0).any()) {
          reaches[static_cast<std::size_t>(s)] = 1;
          frontier.push_back(s);
        }
      }
    }
    for (int s = 0; s < n_states; ++s)
      if (!reaches[static_cast<std::size_t>(s)])
        throw std::invalid_argument("TabularMDP: gamma = 1 but terminal unreachable from state " +
                                    std::to_string(s));
  }
}

void validate_policy(const TabularMDP& mdp, const PolicyTable& policy, bool require_soft) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
    throw std::invalid_argument("policy table shape mismatch");
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    if ((policy.row(s).array() < 0).any() || std::abs(policy.row(s).sum() - 1.0) > kRowSumTol)
      throw std::invalid_argument("policy row " + std::to_string(s) + " is not a distribution");
    if (require_soft && (policy.row(s).array() <= 0).any())
      throw std::invalid_argument("behavior policy row " + std::to_string(s) + " is not soft");
  }
}

Trajectory sample_episode(const TabularMDP& mdp, const PolicyTable& policy, Rng& rng,
                          long max_steps) {
  Trajectory traj;
  int s = rng.categorical(mdp.start);
  if (mdp.is_terminal(s)) {
    traj.terminated = true;
    return traj;
  }
  for (long t = 0; t < max_steps; ++t) {
    const int a = rng.categorical(policy.row(s).transpose());
    const int s_next = rng.categorical(mdp.transition[static_cast<std::size_t>(s)].row(a).transpose());
    const double r = mdp.reward[static_cast<std::size_t>(s)](a, s_next);
    traj.steps.push_back(Step{s, a, r, s_next});
    if (mdp.is_terminal(s_next)) {
      traj.terminated = true;
      return traj;
    }
    s = s_next;
  }
  traj.truncated = true;
  return traj;
}

}  // namespace sparho
