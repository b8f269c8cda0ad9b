#include <fstream>

#include <json.hpp>

#include "experiments_internal.hpp"
#include "sparho/csv.hpp"
#include "sparho/dynamics.hpp"
#include "sparho/environments.hpp"

namespace sparho {

namespace {

/// The two non-terminal states carry the (v1, v2) plot axes. A grid point
/// lifts to action values that keep the true advantage structure,
/// Q(s, .) = v_s + (q_pi(s, .) - v_pi(s)), so the pi-projection of the lift
/// is exactly (v1, v2) and the lift of v_pi is q_pi itself.
Eigen::MatrixXd lift_to_q(const std::vector<int>& value_states, const Eigen::MatrixXd& q_true,
                          const Eigen::VectorXd& v_true, double v1, double v2) {
  Eigen::MatrixXd q = q_true;
  q.row(value_states[0]).array() += v1 - v_true[value_states[0]];
  q.row(value_states[1]).array() += v2 - v_true[value_states[1]];
  return q;
}

}  // namespace

void run_dynamics(const ExperimentConfig& cfg) {
  const auto dir = internal::prepare_out_dir(cfg);
  const TabularMDP mdp = load_mdp_file(cfg.mdp_file);
  const CustomMdpPolicies policies = load_mdp_policies(cfg.mdp_file, mdp);
  if (!policies.has_mu || !policies.has_pi)
    throw std::invalid_argument("dynamics: mdp_file must embed 'mu' and 'pi' policy tables");
  const PolicyTable& mu = policies.mu;
  const PolicyTable& pi = policies.pi;

  std::vector<int> value_states;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!mdp.is_terminal(s)) value_states.push_back(s);
  if (value_states.size() != 2)
    throw std::invalid_argument("dynamics: the vector-field study needs exactly 2 value states");

  // (estimator, n) cells: n = 0 is the Monte Carlo extreme.
  struct FieldSpec {
    WeightKind kind;
    int n;
    std::string label;
  };
  std::vector<FieldSpec> specs;
  const std::vector<std::string> kinds =
      cfg.variants.empty() ? std::vector<std::string>{"is", "sparho"} : cfg.variants;
  for (const std::string& k : kinds) {
    const WeightKind kind = k == "is" ? WeightKind::IS : WeightKind::Sparho;
    specs.push_back({kind, 0, k + "_mc"});
    for (const int n : cfg.nsteps) specs.push_back({kind, n, k + "_n" + std::to_string(n)});
  }

  const int points = cfg.grid_points;
  const double lo = cfg.grid_min;
  const double hi = cfg.grid_max;
  auto grid_value = [&](int i) {
    return points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  };

  const Eigen::MatrixXd q_true = true_action_values(mdp, pi);
  const Eigen::VectorXd v_true = project_state_values(mdp, pi, q_true);

  long flagged = 0;
  {
    CsvWriter field((dir / "field.csv").string(),
                    {"v1_start", "v2_start", "v1_delta", "v2_delta", "variant", "alpha"});
    for (const FieldSpec& spec : specs) {
      for (int i = 0; i < points; ++i) {
        for (int j = 0; j < points; ++j) {
          const double v1 = grid_value(i);
          const double v2 = grid_value(j);
          const Eigen::MatrixXd q = lift_to_q(value_states, q_true, v_true, v1, v2);
          double d1 = std::numeric_limits<double>::quiet_NaN();
          double d2 = std::numeric_limits<double>::quiet_NaN();
          try {
            const ExpectedUpdate upd =
                spec.n == 0
                    ? expected_mc_update(mdp, mu, pi, q, cfg.field_alpha, spec.kind)
                    : expected_nstep_update(mdp, mu, pi, q, cfg.field_alpha, spec.kind, spec.n);
            d1 = upd.projected_v[value_states[0]] - v1;
            d2 = upd.projected_v[value_states[1]] - v2;
          } catch (const SingularSystemError&) {
            ++flagged;
          } catch (const DegenerateInputError&) {
            ++flagged;
          }
          field.row().col(v1).col(v2).col(d1).col(d2).col(spec.label).col(cfg.field_alpha);
        }
      }
    }
  }

  // Deterministic update trajectories from the grid corners and the center.
  {
    CsvWriter traj((dir / "trajectories.csv").string(), {"iter", "v1", "v2", "variant"});
    const std::vector<std::pair<double, double>> starts = {
        {lo, lo}, {lo, hi}, {hi, lo}, {hi, hi}, {(lo + hi) / 2, (lo + hi) / 2}};
    for (const FieldSpec& spec : specs) {
      for (const auto& [v1, v2] : starts) {
        const Eigen::MatrixXd q0 = lift_to_q(value_states, q_true, v_true, v1, v2);
        const ExpectedIterationResult r = iterate_expected_updates(
            mdp, mu, pi, q0, cfg.iterate_steps, cfg.field_alpha, spec.kind, spec.n);
        if (r.flagged) ++flagged;
        for (std::size_t k = 0; k < r.projected.size(); ++k)
          traj.row()
              .col(static_cast<long>(k))
              .col(r.projected[k][value_states[0]])
              .col(r.projected[k][value_states[1]])
              .col(spec.label);
      }
    }
  }

  nlohmann::json summary;
  summary["flagged_solves"] = flagged;
  summary["value_states"] = value_states;
  summary["v_pi"] = {v_true[value_states[0]], v_true[value_states[1]]};
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << "\n";
}

}  // namespace sparho
