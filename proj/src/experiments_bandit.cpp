#include <array>
#include <cmath>

#include "experiments_internal.hpp"
#include "sparho/csv.hpp"
#include "sparho/environments.hpp"
#include "sparho/weights.hpp"

namespace sparho {

namespace {

using internal::prepare_out_dir;

constexpr std::uint64_t kInstanceStream = 0x1a57a9ceULL;
constexpr std::uint64_t kActionStream = 0x9bdfc24bULL;

struct SweepStats {
  double var_w, var_wq, bias, bias_sq, mean_w;
};

SweepStats stats_of(const BanditInstance& inst, const WeightVector& w) {
  const WeightStats s = weight_stats(inst.mu, inst.pi, inst.q, w);
  return SweepStats{s.weight_variance, s.estimate_variance, s.bias, s.bias_sq, s.mean_weight};
}

}  // namespace

void run_bandit_sweep(const ExperimentConfig& cfg) {
  const auto dir = prepare_out_dir(cfg);
  const std::vector<std::string> estimators = {"is", "sparho", "clipped_is", "clipped_sparho"};

  // One task per action-space size; each instance is evaluated under all
  // estimators so the comparison is paired.
  const long n_sizes = static_cast<long>(cfg.action_sizes.size());
  std::vector<std::vector<std::array<SweepStats, 4>>> all(static_cast<std::size_t>(n_sizes));
  std::vector<std::vector<std::uint64_t>> seeds(static_cast<std::size_t>(n_sizes));

  for (long si = 0; si < n_sizes; ++si) {
    all[static_cast<std::size_t>(si)].resize(static_cast<std::size_t>(cfg.instances));
    seeds[static_cast<std::size_t>(si)].resize(static_cast<std::size_t>(cfg.instances));
  }

  parallel_for(n_sizes * cfg.instances, cfg.jobs, [&](long task) {
    const long si = task / cfg.instances;
    const long inst_idx = task % cfg.instances;
    const int n = static_cast<int>(cfg.action_sizes[static_cast<std::size_t>(si)]);
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(si),
                                           static_cast<std::uint64_t>(inst_idx));
    Rng rng(seed);
    const BanditInstance inst = generate_bandit(n, cfg.beta, rng);

    const WeightVector w_is = is_weights(inst.mu, inst.pi);
    const WeightVector w_sp = sparho_weights(inst.mu, inst.pi, inst.q);
    std::array<SweepStats, 4> row;
    row[0] = stats_of(inst, w_is);
    row[1] = stats_of(inst, w_sp);
    row[2] = stats_of(inst, clip_weights(w_is, cfg.clip_lo, cfg.clip_hi));
    row[3] = stats_of(inst, clip_weights(w_sp, cfg.clip_lo, cfg.clip_hi));
    all[static_cast<std::size_t>(si)][static_cast<std::size_t>(inst_idx)] = row;
    seeds[static_cast<std::size_t>(si)][static_cast<std::size_t>(inst_idx)] = seed;
  });

  CsvWriter raw((dir / "raw.csv").string(),
                {"experiment", "n_actions", "instance", "seed", "estimator", "var_w", "var_wq",
                 "bias", "bias_sq", "mean_w"});
  for (long si = 0; si < n_sizes; ++si) {
    for (long i = 0; i < cfg.instances; ++i) {
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        const SweepStats& s = all[static_cast<std::size_t>(si)][static_cast<std::size_t>(i)][e];
        raw.row()
            .col(cfg.experiment)
            .col(cfg.action_sizes[static_cast<std::size_t>(si)])
            .col(i)
            .col(seeds[static_cast<std::size_t>(si)][static_cast<std::size_t>(i)])
            .col(estimators[e])
            .col(s.var_w)
            .col(s.var_wq)
            .col(s.bias)
            .col(s.bias_sq)
            .col(s.mean_w);
      }
    }
  }

  CsvWriter summary((dir / "summary.csv").string(),
                    {"experiment", "n_actions", "estimator", "instances", "mean_var_w",
                     "stderr_var_w", "mean_var_wq", "stderr_var_wq", "mean_bias_sq",
                     "stderr_bias_sq", "mean_mean_w", "stderr_mean_w"});
  for (long si = 0; si < n_sizes; ++si) {
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      std::vector<double> var_w, var_wq, bias_sq, mean_w;
      for (long i = 0; i < cfg.instances; ++i) {
        const SweepStats& s = all[static_cast<std::size_t>(si)][static_cast<std::size_t>(i)][e];
        var_w.push_back(s.var_w);
        var_wq.push_back(s.var_wq);
        bias_sq.push_back(s.bias_sq);
        mean_w.push_back(s.mean_w);
      }
      const MeanStderr m_vw = mean_stderr(var_w);
      const MeanStderr m_vwq = mean_stderr(var_wq);
      const MeanStderr m_b2 = mean_stderr(bias_sq);
      const MeanStderr m_mw = mean_stderr(mean_w);
      summary.row()
          .col(cfg.experiment)
          .col(cfg.action_sizes[static_cast<std::size_t>(si)])
          .col(estimators[e])
          .col(cfg.instances)
          .col(m_vw.mean)
          .col(m_vw.stderr_)
          .col(m_vwq.mean)
          .col(m_vwq.stderr_)
          .col(m_b2.mean)
          .col(m_b2.stderr_)
          .col(m_mw.mean)
          .col(m_mw.stderr_);
    }
  }
}

namespace {

/// The value-aware closed form evaluated at an arbitrary distribution. The
/// empirical policy of regression importance sampling has zero mass on
/// not-yet-taken actions, so the library's softness precondition cannot be
/// demanded here; a degenerate spread falls back to weight 1.
double sparho_weight_at(const Eigen::VectorXd& mu, const Eigen::VectorXd& pi,
                        const Eigen::VectorXd& q, int action) {
  const double mean_q = mu.dot(q);
  const double var_q = (mu.array() * (q.array() - mean_q).square()).sum();
  const double m2 = (mu.array() * q.array().square()).sum();
  if (var_q < 1e-12 * std::max(1.0, m2)) return 1.0;
  return 1.0 + (q[action] - mean_q) * (pi.dot(q) - mean_q) / var_q;
}

double online_weight(const std::string& estimator, const BanditInstance& inst,
                     const Eigen::VectorXd& mu_hat, int action, double clip_lo, double clip_hi) {
  if (estimator == "is") return inst.pi[action] / inst.mu[action];
  if (estimator == "clipped_is")
    return std::clamp(inst.pi[action] / inst.mu[action], clip_lo, clip_hi);
  if (estimator == "sparho")
    return sparho_weights(inst.mu, inst.pi, inst.q).weights[action];
  if (estimator == "clipped_sparho")
    return std::clamp(sparho_weights(inst.mu, inst.pi, inst.q).weights[action], clip_lo, clip_hi);
  if (estimator == "ris_is") return inst.pi[action] / mu_hat[action];
  if (estimator == "ris_sparho") return sparho_weight_at(mu_hat, inst.pi, inst.q, action);
  throw std::invalid_argument("unknown estimator: " + estimator);
}

}  // namespace

void run_bandit_online(const ExperimentConfig& cfg) {
  const auto dir = prepare_out_dir(cfg);
  const std::vector<std::string> estimators =
      cfg.variants.empty()
          ? std::vector<std::string>{"is", "sparho", "clipped_is", "clipped_sparho", "ris_is",
                                     "ris_sparho"}
          : cfg.variants;
  const int n = cfg.n_actions;
  const long measure_every = cfg.measure_every > 0 ? cfg.measure_every : 1;
  const bool per_action = cfg.online_update == "per_action_q";

  struct OnlineRun {
    std::vector<std::vector<std::pair<long, double>>> series;  // per estimator
    std::uint64_t seed{0};
  };
  std::vector<OnlineRun> results(static_cast<std::size_t>(cfg.runs));

  parallel_for(cfg.runs, cfg.jobs, [&](long run) {
    // The instance and the action stream are shared by every estimator in
    // this run, so estimators see identical data.
    const std::uint64_t instance_seed =
        derive_seed(cfg.seed, kInstanceStream, static_cast<std::uint64_t>(run));
    const std::uint64_t action_seed =
        derive_seed(cfg.seed, kActionStream, static_cast<std::uint64_t>(run));
    Rng instance_rng(instance_seed);
    BanditInstance inst = generate_bandit(n, cfg.beta, instance_rng);
    if (cfg.on_policy) inst.mu = inst.pi;
    const double v_true = inst.pi.dot(inst.q);

    Rng action_rng(action_seed);
    std::vector<int> actions(static_cast<std::size_t>(cfg.steps));
    for (long t = 0; t < cfg.steps; ++t)
      actions[static_cast<std::size_t>(t)] = action_rng.categorical(inst.mu);

    OnlineRun out;
    out.seed = instance_seed;
    out.series.resize(estimators.size());
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      double v_hat = 0.0;
      Eigen::VectorXd q_hat = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
      for (long t = 0; t < cfg.steps; ++t) {
        const int a = actions[static_cast<std::size_t>(t)];
        counts[a] += 1.0;
        const Eigen::VectorXd mu_hat = counts / counts.sum();
        const double w =
            online_weight(estimators[e], inst, mu_hat, a, cfg.clip_lo, cfg.clip_hi);
        double error;
        if (per_action) {
          q_hat[a] += cfg.online_alpha * w * (inst.q[a] - q_hat[a]);
          error = (q_hat - inst.q).cwiseAbs().mean();
        } else {
          v_hat += cfg.online_alpha * (w * inst.q[a] - v_hat);
          error = std::abs(v_hat - v_true);
        }
        if ((t + 1) % measure_every == 0 || t + 1 == cfg.steps)
          out.series[e].emplace_back(t + 1, error);
      }
    }
    results[static_cast<std::size_t>(run)] = std::move(out);
  });

  CsvWriter raw((dir / "raw.csv").string(),
                {"experiment", "estimator", "run", "seed", "step", "abs_error"});
  for (long run = 0; run < cfg.runs; ++run) {
    const OnlineRun& r = results[static_cast<std::size_t>(run)];
    for (std::size_t e = 0; e < estimators.size(); ++e)
      for (const auto& [step, err] : r.series[e])
        raw.row().col(cfg.experiment).col(estimators[e]).col(run).col(r.seed).col(step).col(err);
  }

  // Mean/stderr curve per estimator across runs.
  CsvWriter curves((dir / "curves.csv").string(),
                   {"experiment", "estimator", "step", "mean_abs_error", "stderr"});
  const std::size_t n_points =
      results.empty() ? 0 : results.front().series.front().size();
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    for (std::size_t p = 0; p < n_points; ++p) {
      std::vector<double> values;
      long step = 0;
      for (long run = 0; run < cfg.runs; ++run) {
        const auto& series = results[static_cast<std::size_t>(run)].series[e];
        step = series[p].first;
        values.push_back(series[p].second);
      }
      const MeanStderr ms = mean_stderr(values);
      curves.row().col(cfg.experiment).col(estimators[e]).col(step).col(ms.mean).col(ms.stderr_);
    }
  }
}

}  // namespace sparho
