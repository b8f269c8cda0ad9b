#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sparho/dynamics.hpp"
#include "sparho/environments.hpp"

using namespace sparho;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_table(const TabularMDP& mdp, Rng& rng, double scale = 1.0) {
  MatrixXd q = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) q(s, a) = rng.normal(0.0, scale);
  }
  return q;
}

TabularMDP two_state_placeholder() {
  return load_mdp_file(std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json");
}

}  // namespace

TEST_CASE("true_action_values: immediate-terminal and Bellman residual") {
  const std::string spec = R"({
    "n_states": 2, "n_actions": 2, "gamma": 0.9, "terminal": [1],
    "start": [1.0, 0.0],
    "transition": [ [[0.0, 1.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]] ],
    "reward": [ [[2.5, 2.5], [-1.0, -1.0]], [[0.0, 0.0], [0.0, 0.0]] ]
  })";
  const TabularMDP mdp = make_custom_mdp(spec);
  PolicyTable pi(2, 2);
  pi << 0.3, 0.7, 0.5, 0.5;
  const MatrixXd q = true_action_values(mdp, pi);
  CHECK(q(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(q(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(q.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("true_action_values: Bellman residual below 1e-10 on random MDPs") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const bool episodic = trial % 2 == 0;
    const TabularMDP mdp =
        test::random_mdp(2 + rng.uniform_int(5), 2 + rng.uniform_int(2),
                         episodic ? 1.0 : 0.5 + 0.45 * rng.uniform(), episodic, rng);
    const PolicyTable pi = test::random_policy(mdp, rng);
    const MatrixXd q = true_action_values(mdp, pi);
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double rhs = 0.0;
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          const double p = mdp.transition[static_cast<std::size_t>(s)](a, s2);
          if (p == 0.0) continue;
          double boot = 0.0;
          if (!mdp.is_terminal(s2)) boot = pi.row(s2).dot(q.row(s2));
          rhs += p * (mdp.reward[static_cast<std::size_t>(s)](a, s2) + mdp.gamma * boot);
        }
        CHECK(std::abs(q(s, a) - rhs) < 1e-10);
      }
    }
  }
}

TEST_CASE("true_action_values: 5x5 uniform grid matches the enumeration oracle") {
  Rng rng(43);
  const EnvWithPolicies env = make_grid_world(5, GridDirs::Four, 1.0, 1.0, nullptr, rng);
  const MatrixXd q = true_action_values(env.mdp, env.pi);
  const MatrixXd q_ref = test::enumerate_action_values(env.mdp, env.pi, 1e-10);
  CHECK((q - q_ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("operator identity: P_mu diag(rho_is) equals P_pi row by row") {
  Rng rng(47);
  const TabularMDP mdp = test::random_mdp(5, 3, 0.9, true, rng);
  const PolicyTable mu = test::random_policy(mdp, rng);
  const PolicyTable pi = test::random_policy(mdp, rng);

  const StateActionOperator op_mu = make_state_action_operator(mdp, mu);
  const StateActionOperator op_pi = make_state_action_operator(mdp, pi);
  const MatrixXd rho = pair_weights(mdp, mu, pi, MatrixXd::Zero(5, 3), WeightKind::IS);

  MatrixXd weighted = op_mu.transition;
  for (int s2 = 0; s2 < mdp.n_states; ++s2)
    for (int a2 = 0; a2 < mdp.n_actions; ++a2)
      weighted.col(op_mu.pair(s2, a2)) *= rho(s2, a2);
  for (Eigen::Index i = 0; i < weighted.rows(); ++i)
    CHECK((weighted.row(i) - op_pi.transition.row(i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("state-action operator: rows sum to one, rewards vanish at terminals") {
  Rng rng(53);
  const TabularMDP mdp = test::random_mdp(4, 2, 1.0, true, rng);
  const PolicyTable mu = test::random_policy(mdp, rng);
  const StateActionOperator op = make_state_action_operator(mdp, mu);
  const VectorXd row_sums = op.transition.rowwise().sum();
  CHECK((row_sums.array() - 1.0).abs().maxCoeff() < 1e-12);
  for (int a = 0; a < mdp.n_actions; ++a)
    CHECK(op.expected_reward[op.pair(mdp.n_states - 1, a)] == 0.0);
}

TEST_CASE("expected_return_vector: IS ignores q_current and recovers q_pi") {
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    const TabularMDP mdp = test::random_mdp(3 + rng.uniform_int(4), 2 + rng.uniform_int(2),
                                            0.5 + 0.4 * rng.uniform(), trial % 2 == 0, rng);
    const PolicyTable mu = test::random_policy(mdp, rng);
    const PolicyTable pi = test::random_policy(mdp, rng);
    const MatrixXd q_true = true_action_values(mdp, pi);

    const MatrixXd g1 =
        expected_return_vector(mdp, mu, pi, random_table(mdp, rng), WeightKind::IS);
    const MatrixXd g2 =
        expected_return_vector(mdp, mu, pi, random_table(mdp, rng), WeightKind::IS);
    CHECK((g1 - q_true).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((g1 - g2).cwiseAbs().maxCoeff() < 1e-8);

    // Sparho at the true values keeps them fixed.
    const MatrixXd g3 = expected_return_vector(mdp, mu, pi, q_true, WeightKind::Sparho);
    CHECK((g3 - q_true).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("expected_return_vector: agrees with sampled per-decision returns") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);

  Rng rng(61);
  const MatrixXd q_current = random_table(mdp, rng, 0.5);
  const MatrixXd w = pair_weights(mdp, pol.mu, pol.pi, q_current, WeightKind::Sparho);
  const MatrixXd g = expected_return_vector(mdp, pol.mu, pol.pi, q_current, WeightKind::Sparho);

  // Smoke-scale sampling oracle (the acceptance suite runs the full one).
  const long samples = 20000;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double sum = 0.0, sum_sq = 0.0;
      for (long i = 0; i < samples; ++i) {
        double weight_prod = 1.0;
        double ret = 0.0;
        int state = s;
        int action = a;
        double discount = 1.0;
        for (int step = 0; step < 10000; ++step) {
          const int s2 = rng.categorical(
              mdp.transition[static_cast<std::size_t>(state)].row(action).transpose());
          ret += discount * weight_prod *
                 mdp.reward[static_cast<std::size_t>(state)](action, s2);
          if (mdp.is_terminal(s2)) break;
          const int a2 = rng.categorical(pol.mu.row(s2).transpose());
          discount *= mdp.gamma;
          weight_prod *= w(s2, a2);
          state = s2;
          action = a2;
        }
        sum += ret;
        sum_sq += ret * ret;
      }
      const double mean = sum / samples;
      const double var = sum_sq / samples - mean * mean;
      const double stderr_est = std::sqrt(var / samples);
      CHECK(std::abs(mean - g(s, a)) < 8 * stderr_est + 1e-6);
    }
  }
}

TEST_CASE("visitation_weights: expected visits on a deterministic chain") {
  // Start -> middle -> terminal, one action. Each non-terminal pair is
  // visited exactly once per episode.
  const std::string spec = R"({
    "n_states": 3, "n_actions": 1, "gamma": 1.0, "terminal": [2],
    "start": [1.0, 0.0, 0.0],
    "transition": [ [[0.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]], [[0.0, 0.0, 1.0]] ],
    "reward": [ [[1.0, 1.0, 1.0]], [[1.0, 1.0, 1.0]], [[0.0, 0.0, 0.0]] ]
  })";
  const TabularMDP mdp = make_custom_mdp(spec);
  const PolicyTable mu = PolicyTable::Ones(3, 1);
  const MatrixXd d = visitation_weights(mdp, mu);
  CHECK(d(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d(2, 0) == 0.0);
}

TEST_CASE("visitation_weights: matches sampled visit counts") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);
  const MatrixXd d = visitation_weights(mdp, pol.mu);

  Rng rng(67);
  MatrixXd counts = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  const long episodes = 200000;
  for (long e = 0; e < episodes; ++e) {
    const Trajectory traj = sample_episode(mdp, pol.mu, rng);
    for (const Step& st : traj.steps) counts(st.state, st.action) += 1.0;
  }
  counts /= static_cast<double>(episodes);
  CHECK((counts - d).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("expected_mc_update: zero at the fixed point, IS points at q_pi") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);
  const MatrixXd q_true = true_action_values(mdp, pol.pi);

  for (const WeightKind kind : {WeightKind::IS, WeightKind::Sparho}) {
    const ExpectedUpdate at_fp = expected_mc_update(mdp, pol.mu, pol.pi, q_true, 0.1, kind);
    CHECK(at_fp.delta_q.cwiseAbs().maxCoeff() < 1e-10);
  }

  Rng rng(71);
  const MatrixXd q = random_table(mdp, rng);
  const ExpectedUpdate upd = expected_mc_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::IS);
  const MatrixXd d = visitation_weights(mdp, pol.mu);
  // IS: the expected return is q_pi regardless of q, so the update is exactly
  // alpha d (q_pi - q).
  const MatrixXd expect = 0.1 * d.cwiseProduct(q_true - q);
  CHECK((upd.delta_q - expect).cwiseAbs().maxCoeff() < 1e-9);

  // Determinism of the full field computation.
  const ExpectedUpdate again = expected_mc_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::IS);
  CHECK(upd.delta_q == again.delta_q);
  CHECK(upd.projected_v == again.projected_v);
}

TEST_CASE("expected_nstep_update: n = 1 is the one-step expected target") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);
  Rng rng(73);
  const MatrixXd q = random_table(mdp, rng);

  // One application of the weighted Bellman operator, assembled by hand.
  const MatrixXd w = pair_weights(mdp, pol.mu, pol.pi, q, WeightKind::Sparho);
  MatrixXd g1 = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.transition[static_cast<std::size_t>(s)](a, s2);
        if (p == 0.0) continue;
        double boot = 0.0;
        if (!mdp.is_terminal(s2))
          for (int a2 = 0; a2 < mdp.n_actions; ++a2)
            boot += pol.mu(s2, a2) * w(s2, a2) * q(s2, a2);
        g1(s, a) += p * (mdp.reward[static_cast<std::size_t>(s)](a, s2) + mdp.gamma * boot);
      }
    }
  }
  const MatrixXd d = visitation_weights(mdp, pol.mu);
  const ExpectedUpdate upd = expected_nstep_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::Sparho, 1);
  CHECK((upd.delta_q - 0.1 * d.cwiseProduct(g1 - q)).cwiseAbs().maxCoeff() < 1e-12);

  // At the fixed point the n-step update vanishes for any n.
  const MatrixXd q_true = true_action_values(mdp, pol.pi);
  for (const int n : {1, 4, 16})
    CHECK(expected_nstep_update(mdp, pol.mu, pol.pi, q_true, 0.1, WeightKind::Sparho, n)
              .delta_q.cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("expected_nstep_update: converges to the MC update as n grows") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);
  Rng rng(79);
  const MatrixXd q = random_table(mdp, rng, 0.5);
  const ExpectedUpdate mc = expected_mc_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::Sparho);
  const ExpectedUpdate n16 =
      expected_nstep_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::Sparho, 16);
  const ExpectedUpdate n64 =
      expected_nstep_update(mdp, pol.mu, pol.pi, q, 0.1, WeightKind::Sparho, 64);
  const double gap16 = (n16.delta_q - mc.delta_q).cwiseAbs().maxCoeff();
  const double gap64 = (n64.delta_q - mc.delta_q).cwiseAbs().maxCoeff();
  CHECK(gap64 < gap16);
  CHECK(gap64 < 1e-6);
}

TEST_CASE("iterate_expected_updates: constant at q_pi, geometric for IS") {
  const TabularMDP mdp = two_state_placeholder();
  const CustomMdpPolicies pol = load_mdp_policies(
      std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json", mdp);
  const MatrixXd q_true = true_action_values(mdp, pol.pi);

  const ExpectedIterationResult fixed =
      iterate_expected_updates(mdp, pol.mu, pol.pi, q_true, 20, 0.1, WeightKind::Sparho);
  CHECK_FALSE(fixed.flagged);
  CHECK((fixed.final_q - q_true).cwiseAbs().maxCoeff() < 1e-9);

  // IS iteration: each entry contracts by exactly (1 - alpha d(s, a)).
  Rng rng(83);
  const MatrixXd q0 = random_table(mdp, rng);
  const MatrixXd d = visitation_weights(mdp, pol.mu);
  double d_min = std::numeric_limits<double>::infinity();
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.is_terminal(s)) d_min = std::min(d_min, d.row(s).minCoeff());

  MatrixXd q = q0;
  const double alpha = 0.1;
  for (int k = 0; k < 30; ++k) {
    const ExpectedUpdate upd = expected_mc_update(mdp, pol.mu, pol.pi, q, alpha, WeightKind::IS);
    const MatrixXd next = q + upd.delta_q;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.is_terminal(s)) continue;
      for (int a = 0; a < mdp.n_actions; ++a)
        CHECK(std::abs(next(s, a) - q_true(s, a)) <=
              (1.0 - alpha * d_min) * std::abs(q(s, a) - q_true(s, a)) + 1e-12);
    }
    q = next;
  }

  // Sparho trajectory: converges near the fixed point or is flagged.
  const ExpectedIterationResult sp =
      iterate_expected_updates(mdp, pol.mu, pol.pi, q0, 5000, 0.1, WeightKind::Sparho);
  if (!sp.flagged) {
    CHECK((sp.final_q - q_true).cwiseAbs().maxCoeff() < 1e-6);
  } else {
    CHECK(sp.flagged_iter >= 0);
  }
}

TEST_CASE("singular solves are reported with a condition estimate") {
  // One self-looping state, two actions. The mean-weight constraint forces
  // E_mu[w] = c; with c = 1/gamma the weighted operator gamma P_mu diag(w)
  // has eigenvalue exactly 1 and the return system is singular.
  const std::string spec = R"({
    "n_states": 1, "n_actions": 2, "gamma": 0.9, "terminal": [],
    "start": [1.0],
    "transition": [ [[1.0], [1.0]] ],
    "reward": [ [[1.0], [-1.0]] ]
  })";
  const TabularMDP mdp = make_custom_mdp(spec);
  PolicyTable mu(1, 2), pi(1, 2);
  mu << 0.5, 0.5;
  pi << 0.5, 0.5;
  MatrixXd q(1, 2);
  q << 1.0, -1.0;

  CHECK_THROWS_AS(
      expected_return_vector(mdp, mu, pi, q, WeightKind::MinVarLengthC, 1.0 / 0.9),
      SingularSystemError);
  try {
    expected_return_vector(mdp, mu, pi, q, WeightKind::MinVarLengthC, 1.0 / 0.9);
  } catch (const SingularSystemError& e) {
    CHECK(e.rcond() < 1e-10);
  }
  // Away from the singular length the solve succeeds.
  SolveReport report;
  const MatrixXd g =
      expected_return_vector(mdp, mu, pi, q, WeightKind::MinVarLengthC, 0.5, &report);
  CHECK(g.allFinite());
  CHECK(report.rcond > 1e-10);
}
