#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparho/mdp.hpp"
#include "sparho/weights.hpp"

namespace sparho {

/// A linear solve failed or is too ill-conditioned to trust.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double rcond)
      : std::runtime_error(what + " (rcond = " + std::to_string(rcond) + ")"), rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

/// Dense transition operator between (state, action) pairs under one policy,
/// with the expected one-step reward per pair. Terminal pairs self-loop with
/// reward 0, so every row is stochastic.
struct StateActionOperator {
  Eigen::MatrixXd transition;       // (n_states * n_actions) square, pair index s * n_actions + a
  Eigen::VectorXd expected_reward;  // per pair
  int n_states{0};
  int n_actions{0};

  Eigen::Index pair(int s, int a) const {
    return static_cast<Eigen::Index>(s) * n_actions + a;
  }
};

StateActionOperator make_state_action_operator(const TabularMDP& mdp, const PolicyTable& policy);

struct SolveReport {
  double rcond{0.0};
};

/// Exact q_pi by dense solve of the Bellman system restricted to non-terminal
/// pairs; terminal rows are 0.
Eigen::MatrixXd true_action_values(const TabularMDP& mdp, const PolicyTable& pi,
                                   SolveReport* report = nullptr);

/// Per-pair weights of `kind` computed state by state from q_current.
/// Terminal rows are set to 1 (their values are pinned at 0 and never enter a
/// restricted solve).
Eigen::MatrixXd pair_weights(const TabularMDP& mdp, const PolicyTable& mu, const PolicyTable& pi,
                             const Eigen::MatrixXd& q_current, WeightKind kind, double c = 1.0);

/// Expectation of the per-decision return under mu with weights computed from
/// q_current: the solution of (I - gamma P_mu diag(w)) G = rbar over
/// non-terminal pairs.
Eigen::MatrixXd expected_return_vector(const TabularMDP& mdp, const PolicyTable& mu,
                                       const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                       WeightKind kind, double c = 1.0,
                                       SolveReport* report = nullptr);

/// Expected number of visits to each (state, action) pair per episode under
/// mu, from the start distribution.
Eigen::MatrixXd visitation_weights(const TabularMDP& mdp, const PolicyTable& mu);

struct ExpectedUpdate {
  Eigen::MatrixXd delta_q;      // n_states x n_actions
  Eigen::VectorXd projected_v;  // pi-projection of Q + delta_q
};

/// Expected every-visit Monte Carlo update
/// alpha * d_mu(s, a) * (G(s, a) - Q(s, a)).
ExpectedUpdate expected_mc_update(const TabularMDP& mdp, const PolicyTable& mu,
                                  const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                  double alpha, WeightKind kind, double c = 1.0,
                                  SolveReport* report = nullptr);

/// Expected n-step update: the return operator applied n times from the
/// current values instead of being iterated to its fixed point.
ExpectedUpdate expected_nstep_update(const TabularMDP& mdp, const PolicyTable& mu,
                                     const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                     double alpha, WeightKind kind, int n, double c = 1.0);

/// pi-projection v(s) = sum_a pi(a|s) Q(s, a).
Eigen::VectorXd project_state_values(const TabularMDP& mdp, const PolicyTable& pi,
                                     const Eigen::MatrixXd& q);

struct ExpectedIterationResult {
  std::vector<Eigen::VectorXd> projected;  // projection after each iterate, index 0 = start
  Eigen::MatrixXd final_q;
  bool flagged{false};
  long flagged_iter{-1};
  std::string flag_reason;
};

/// Deterministic iteration Q <- Q + expected update. n_step = 0 iterates the
/// Monte Carlo update. A degenerate or singular iterate flags the run with
/// its index instead of throwing.
ExpectedIterationResult iterate_expected_updates(const TabularMDP& mdp, const PolicyTable& mu,
                                                 const PolicyTable& pi, const Eigen::MatrixXd& q0,
                                                 long steps, double alpha, WeightKind kind,
                                                 int n_step = 0, double c = 1.0);

}  // namespace sparho
