#include "sparho/dynamics.hpp"

#include <cmath>

namespace sparho {

namespace {

constexpr double kRcondFloor = 1e-14;

/// Indices of non-terminal pairs in pair order s * n_actions + a.
std::vector<Eigen::Index> nonterminal_pairs(const TabularMDP& mdp) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a)
      idx.push_back(static_cast<Eigen::Index>(s) * mdp.n_actions + a);
  }
  return idx;
}

/// Restricted pair-transition matrix under `policy` with per-successor-pair
/// weights, and the matching expected-reward vector.
void build_restricted(const TabularMDP& mdp, const PolicyTable& policy,
                      const Eigen::MatrixXd* weights, const std::vector<Eigen::Index>& nt,
                      Eigen::MatrixXd& P, Eigen::VectorXd& rbar) {
  const Eigen::Index n = static_cast<Eigen::Index>(nt.size());
  std::vector<Eigen::Index> inverse(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, -1);
  for (Eigen::Index i = 0; i < n; ++i) inverse[static_cast<std::size_t>(nt[i])] = i;

  P = Eigen::MatrixXd::Zero(n, n);
  rbar = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = static_cast<int>(nt[i]) / mdp.n_actions;
    const int a = static_cast<int>(nt[i]) % mdp.n_actions;
    const auto& trans = mdp.transition[static_cast<std::size_t>(s)];
    const auto& rew = mdp.reward[static_cast<std::size_t>(s)];
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
      const double p = trans(a, s2);
      if (p == 0.0) continue;
      rbar[i] += p * rew(a, s2);
      if (mdp.is_terminal(s2)) continue;
      for (int a2 = 0; a2 < mdp.n_actions; ++a2) {
        const Eigen::Index j = inverse[static_cast<std::size_t>(s2) * mdp.n_actions + a2];
        const double w = weights ? (*weights)(s2, a2) : 1.0;
        P(i, j) += p * policy(s2, a2) * w;
      }
    }
  }
}

/// Solves (I - gamma P) x = b with a conditioning check.
Eigen::VectorXd solve_bellman(const Eigen::MatrixXd& P, const Eigen::VectorXd& b, double gamma,
                              SolveReport* report, const char* what) {
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - gamma * P;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const double rcond = lu.rcond();
  if (report) report->rcond = rcond;
  if (!(rcond > kRcondFloor)) throw SingularSystemError(what, rcond);
  Eigen::VectorXd x = lu.solve(b);
  if (!x.allFinite()) throw SingularSystemError(what, rcond);
  return x;
}

Eigen::MatrixXd scatter_to_table(const TabularMDP& mdp, const std::vector<Eigen::Index>& nt,
                                 const Eigen::VectorXd& values) {
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(nt.size()); ++i) {
    const int s = static_cast<int>(nt[i]) / mdp.n_actions;
    const int a = static_cast<int>(nt[i]) % mdp.n_actions;
    table(s, a) = values[i];
  }
  return table;
}

Eigen::VectorXd gather_from_table(const TabularMDP& mdp, const std::vector<Eigen::Index>& nt,
                                  const Eigen::MatrixXd& table) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(nt.size()));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(nt.size()); ++i) {
    const int s = static_cast<int>(nt[i]) / mdp.n_actions;
    const int a = static_cast<int>(nt[i]) % mdp.n_actions;
    values[i] = table(s, a);
  }
  return values;
}

}  // namespace

StateActionOperator make_state_action_operator(const TabularMDP& mdp, const PolicyTable& policy) {
  StateActionOperator op;
  op.n_states = mdp.n_states;
  op.n_actions = mdp.n_actions;
  const Eigen::Index n = static_cast<Eigen::Index>(mdp.n_states) * mdp.n_actions;
  op.transition = Eigen::MatrixXd::Zero(n, n);
  op.expected_reward = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < mdp.n_states; ++s) {
    const auto& trans = mdp.transition[static_cast<std::size_t>(s)];
    const auto& rew = mdp.reward[static_cast<std::size_t>(s)];
    for (int a = 0; a < mdp.n_actions; ++a) {
      const Eigen::Index i = op.pair(s, a);
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = trans(a, s2);
        if (p == 0.0) continue;
        if (!mdp.is_terminal(s)) op.expected_reward[i] += p * rew(a, s2);
        for (int a2 = 0; a2 < mdp.n_actions; ++a2)
          op.transition(i, op.pair(s2, a2)) += p * policy(s2, a2);
      }
    }
  }
  return op;
}

Eigen::MatrixXd true_action_values(const TabularMDP& mdp, const PolicyTable& pi,
                                   SolveReport* report) {
  const auto nt = nonterminal_pairs(mdp);
  Eigen::MatrixXd P;
  Eigen::VectorXd rbar;
  build_restricted(mdp, pi, nullptr, nt, P, rbar);
  const Eigen::VectorXd q = solve_bellman(P, rbar, mdp.gamma, report, "true_action_values");
  return scatter_to_table(mdp, nt, q);
}

Eigen::MatrixXd pair_weights(const TabularMDP& mdp, const PolicyTable& mu, const PolicyTable& pi,
                             const Eigen::MatrixXd& q_current, WeightKind kind, double c) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(mdp.n_states, mdp.n_actions);
  const bool ratio_kind = kind == WeightKind::IS || kind == WeightKind::ClippedIS;
  for (int s = 0; s < mdp.n_states; ++s) {
    // Terminal values are pinned at 0, so their rows never enter a solve.
    // The probability-ratio kinds are still well defined there (and make
    // P_mu diag(rho) = P_pi hold over the whole pair space); the value-aware
    // kinds are degenerate at a constant row and stay at 1.
    if (mdp.is_terminal(s) && !ratio_kind) continue;
    w.row(s) = weights_for(kind, mu.row(s).transpose(), pi.row(s).transpose(),
                           q_current.row(s).transpose(), c)
                   .weights.transpose();
  }
  return w;
}

Eigen::MatrixXd expected_return_vector(const TabularMDP& mdp, const PolicyTable& mu,
                                       const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                       WeightKind kind, double c, SolveReport* report) {
  const auto nt = nonterminal_pairs(mdp);
  const Eigen::MatrixXd w = pair_weights(mdp, mu, pi, q_current, kind, c);
  Eigen::MatrixXd P;
  Eigen::VectorXd rbar;
  build_restricted(mdp, mu, &w, nt, P, rbar);
  const Eigen::VectorXd g = solve_bellman(P, rbar, mdp.gamma, report, "expected_return_vector");
  return scatter_to_table(mdp, nt, g);
}

Eigen::MatrixXd visitation_weights(const TabularMDP& mdp, const PolicyTable& mu) {
  const auto nt = nonterminal_pairs(mdp);
  Eigen::MatrixXd P;
  Eigen::VectorXd rbar;
  build_restricted(mdp, mu, nullptr, nt, P, rbar);

  Eigen::VectorXd s0(static_cast<Eigen::Index>(nt.size()));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(nt.size()); ++i) {
    const int s = static_cast<int>(nt[i]) / mdp.n_actions;
    const int a = static_cast<int>(nt[i]) % mdp.n_actions;
    s0[i] = mdp.start[s] * mu(s, a);
  }
  // d^T = s0^T (I - P)^(-1), i.e. (I - P^T) d = s0. Visit counting is
  // undiscounted regardless of gamma.
  const Eigen::MatrixXd Pt = P.transpose();
  const Eigen::VectorXd d = solve_bellman(Pt, s0, 1.0, nullptr, "visitation_weights");
  return scatter_to_table(mdp, nt, d);
}

Eigen::VectorXd project_state_values(const TabularMDP& mdp, const PolicyTable& pi,
                                     const Eigen::MatrixXd& q) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    v[s] = pi.row(s).dot(q.row(s));
  }
  return v;
}

ExpectedUpdate expected_mc_update(const TabularMDP& mdp, const PolicyTable& mu,
                                  const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                  double alpha, WeightKind kind, double c, SolveReport* report) {
  const Eigen::MatrixXd g = expected_return_vector(mdp, mu, pi, q_current, kind, c, report);
  const Eigen::MatrixXd d = visitation_weights(mdp, mu);
  ExpectedUpdate upd;
  upd.delta_q = alpha * d.cwiseProduct(g - q_current);
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.is_terminal(s)) upd.delta_q.row(s).setZero();
  upd.projected_v = project_state_values(mdp, pi, q_current + upd.delta_q);
  return upd;
}

ExpectedUpdate expected_nstep_update(const TabularMDP& mdp, const PolicyTable& mu,
                                     const PolicyTable& pi, const Eigen::MatrixXd& q_current,
                                     double alpha, WeightKind kind, int n, double c) {
  if (n < 1) throw std::invalid_argument("expected_nstep_update: n must be >= 1");
  const auto nt = nonterminal_pairs(mdp);
  const Eigen::MatrixXd w = pair_weights(mdp, mu, pi, q_current, kind, c);
  Eigen::MatrixXd P;
  Eigen::VectorXd rbar;
  build_restricted(mdp, mu, &w, nt, P, rbar);

  Eigen::VectorXd g = gather_from_table(mdp, nt, q_current);
  for (int k = 0; k < n; ++k) g = rbar + mdp.gamma * (P * g);

  const Eigen::MatrixXd g_table = scatter_to_table(mdp, nt, g);
  const Eigen::MatrixXd d = visitation_weights(mdp, mu);
  ExpectedUpdate upd;
  upd.delta_q = alpha * d.cwiseProduct(g_table - q_current);
  for (int s = 0; s < mdp.n_states; ++s)
    if (mdp.is_terminal(s)) upd.delta_q.row(s).setZero();
  upd.projected_v = project_state_values(mdp, pi, q_current + upd.delta_q);
  return upd;
}

ExpectedIterationResult iterate_expected_updates(const TabularMDP& mdp, const PolicyTable& mu,
                                                 const PolicyTable& pi, const Eigen::MatrixXd& q0,
                                                 long steps, double alpha, WeightKind kind,
                                                 int n_step, double c) {
  ExpectedIterationResult result;
  Eigen::MatrixXd q = q0;
  result.projected.push_back(project_state_values(mdp, pi, q));
  for (long k = 0; k < steps; ++k) {
    try {
      const ExpectedUpdate upd =
          n_step == 0 ? expected_mc_update(mdp, mu, pi, q, alpha, kind, c)
                      : expected_nstep_update(mdp, mu, pi, q, alpha, kind, n_step, c);
      q += upd.delta_q;
    } catch (const SingularSystemError& e) {
      result.flagged = true;
      result.flagged_iter = k;
      result.flag_reason = e.what();
      break;
    } catch (const DegenerateInputError& e) {
      result.flagged = true;
      result.flagged_iter = k;
      result.flag_reason = e.what();
      break;
    }
    if (!q.allFinite()) {
      result.flagged = true;
      result.flagged_iter = k;
      result.flag_reason = "non-finite iterate";
      break;
    }
    result.projected.push_back(project_state_values(mdp, pi, q));
  }
  result.final_q = q;
  return result;
}

}  // namespace sparho
