#include <stdexcept>

#include "experiments_internal.hpp"
#include "sparho/csv.hpp"
#include "sparho/dynamics.hpp"
#include "sparho/environments.hpp"

namespace sparho {

namespace internal {

namespace {

LearnerConfig make_learner_config(const ExperimentConfig& cfg, const TdCell& cell) {
  LearnerConfig lc;
  lc.alpha = cell.alpha;
  lc.lambda = cell.lambda;
  lc.gamma = cfg.gamma;
  if (cell.variant == "q_lambda") {
    lc.variant = LearnerVariant::QLambda;
  } else if (cell.variant == "sparho_lambda") {
    lc.variant = LearnerVariant::SparhoLambda;
  } else if (cell.variant == "retrace_lambda") {
    lc.variant = LearnerVariant::RetraceLambda;
    lc.clip = {cfg.clip_lo, cfg.clip_hi};
  } else if (cell.variant == "resparho_lambda") {
    lc.variant = LearnerVariant::ReSparhoLambda;
    lc.clip = {cfg.clip_lo, cfg.clip_hi};
  } else if (cell.variant == "emphatic_is") {
    lc.variant = LearnerVariant::EmphaticQ;
    lc.weights = WeightKind::IS;
  } else if (cell.variant == "emphatic_sparho") {
    lc.variant = LearnerVariant::EmphaticQ;
    lc.weights = WeightKind::Sparho;
  } else if (cell.variant == "emphatic_clipped_is") {
    lc.variant = LearnerVariant::EmphaticQ;
    lc.weights = WeightKind::ClippedIS;
    lc.clip = {cfg.clip_lo, cfg.clip_hi};
  } else if (cell.variant == "emphatic_clipped_sparho") {
    lc.variant = LearnerVariant::EmphaticQ;
    lc.weights = WeightKind::ClippedSparho;
    lc.clip = {cfg.clip_lo, cfg.clip_hi};
  } else {
    throw std::invalid_argument("unknown variant: " + cell.variant);
  }
  return lc;
}

std::vector<std::string> default_variants(TdExperimentKind kind) {
  if (kind == TdExperimentKind::Emphatic)
    return {"emphatic_is", "emphatic_sparho", "emphatic_clipped_is", "emphatic_clipped_sparho"};
  return {"q_lambda", "sparho_lambda", "retrace_lambda", "resparho_lambda"};
}

}  // namespace

void run_td_experiment(const ExperimentConfig& cfg, TdExperimentKind kind) {
  const auto dir = prepare_out_dir(cfg);
  const auto cells = enumerate_cells(cfg, default_variants(kind));
  const long measure_every =
      cfg.measure_every > 0 ? cfg.measure_every : std::max<long>(1, cfg.steps / 100);

  const long n_tasks = static_cast<long>(cells.size()) * cfg.runs;
  std::vector<TdRunResult> results(static_cast<std::size_t>(n_tasks));

  parallel_for(n_tasks, cfg.jobs, [&](long task) {
    const long cell_idx = task / cfg.runs;
    const long run = task % cfg.runs;
    const TdCell& cell = cells[static_cast<std::size_t>(cell_idx)];
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(cell.param_index),
                                           static_cast<std::uint64_t>(run));
    Rng rng(seed);

    EnvWithPolicies env;
    if (kind == TdExperimentKind::PathWorld) {
      env = make_path_world(cfg.width, cfg.depth, cfg.beta, rng);
    } else {
      const GridDirs dirs = cfg.dirs == "four" ? GridDirs::Four : GridDirs::Eight;
      std::function<int(int)> preferred;
      if (cfg.preferred_action >= 0) {
        const int fixed = cfg.preferred_action;
        preferred = [fixed](int) { return fixed; };
      }
      env = make_grid_world(cfg.side, dirs, cfg.eps_pi, cfg.eps_mu, preferred, rng);
    }
    if (cfg.on_policy) env.mu = env.pi;

    const Eigen::MatrixXd q_true = true_action_values(env.mdp, env.pi);
    const LearnerConfig lc = make_learner_config(cfg, cell);

    TdRunResult result;
    if (kind == TdExperimentKind::Emphatic) {
      ValueFunction value =
          ValueFunction::tabular(env.mdp.n_states, env.mdp.n_actions, env.mdp.terminal);
      EmphaticLearner learner(std::move(value), lc, env.mu, env.pi);
      result = drive_learner(learner, env.mdp, env.mu, q_true, cfg.steps, measure_every,
                             cfg.max_steps, rng);
    } else if (kind == TdExperimentKind::GridLinear) {
      const FeatureMap features = make_random_features(env.mdp.n_states, rng);
      ValueFunction value = ValueFunction::linear(features, env.mdp.n_actions, env.mdp.terminal);
      TdLambdaLearner learner(std::move(value), lc, env.mu, env.pi);
      result = drive_learner(learner, env.mdp, env.mu, q_true, cfg.steps, measure_every,
                             cfg.max_steps, rng);
    } else {
      ValueFunction value =
          ValueFunction::tabular(env.mdp.n_states, env.mdp.n_actions, env.mdp.terminal);
      TdLambdaLearner learner(std::move(value), lc, env.mu, env.pi);
      result = drive_learner(learner, env.mdp, env.mu, q_true, cfg.steps, measure_every,
                             cfg.max_steps, rng);
    }
    result.seed = seed;
    result.series.experiment = cfg.experiment;
    result.series.variant = cell.variant;
    result.series.cell = cell_label(cell.alpha, cell.lambda);
    result.series.run = run;
    result.series.seed = seed;
    results[static_cast<std::size_t>(task)] = std::move(result);
  });

  // Raw learning curves, one row per measurement.
  {
    CsvWriter raw((dir / "raw.csv").string(),
                  {"experiment", "variant", "alpha", "lambda", "run", "seed", "step", "rms"});
    for (long task = 0; task < n_tasks; ++task) {
      const TdCell& cell = cells[static_cast<std::size_t>(task / cfg.runs)];
      const TdRunResult& r = results[static_cast<std::size_t>(task)];
      for (const MetricPoint& point : r.series.points)
        raw.row()
            .col(r.series.experiment)
            .col(cell.variant)
            .col(cell.alpha)
            .col(cell.lambda)
            .col(r.series.run)
            .col(r.series.seed)
            .col(point.step)
            .col(point.value);
    }
  }

  // Final metric per run.
  {
    CsvWriter finals((dir / "finals.csv").string(),
                     {"experiment", "variant", "alpha", "lambda", "run", "seed", "final_rms",
                      "auc", "diverged", "diverged_step"});
    for (long task = 0; task < n_tasks; ++task) {
      const TdCell& cell = cells[static_cast<std::size_t>(task / cfg.runs)];
      const TdRunResult& r = results[static_cast<std::size_t>(task)];
      finals.row()
          .col(cfg.experiment)
          .col(cell.variant)
          .col(cell.alpha)
          .col(cell.lambda)
          .col(task % cfg.runs)
          .col(r.seed)
          .col(r.final_rms)
          .col(r.auc)
          .col(static_cast<long>(r.diverged ? 1 : 0))
          .col(r.diverged_step);
    }
  }

  // Per-cell aggregates plus best-cell learning curves per variant.
  std::vector<RunSummary> summaries;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<double> finals, aucs;
    for (long run = 0; run < cfg.runs; ++run) {
      const TdRunResult& r = results[c * static_cast<std::size_t>(cfg.runs) +
                                     static_cast<std::size_t>(run)];
      finals.push_back(r.final_rms);
      aucs.push_back(r.auc);
    }
    summaries.push_back(summarize_runs(cfg.experiment, cells[c].variant,
                                       cell_label(cells[c].alpha, cells[c].lambda), finals, aucs));
  }
  {
    CsvWriter summary((dir / "summary.csv").string(),
                      {"experiment", "variant", "cell", "runs", "final_mean", "final_stderr",
                       "auc_mean", "auc_stderr"});
    for (const RunSummary& s : summaries)
      summary.row()
          .col(s.experiment)
          .col(s.variant)
          .col(s.cell)
          .col(s.runs)
          .col(s.final_mean)
          .col(s.final_stderr)
          .col(s.auc_mean)
          .col(s.auc_stderr);
  }

  // Best cell per variant by mean final RMS (non-finite means sort last).
  {
    CsvWriter curves((dir / "curves.csv").string(),
                     {"experiment", "variant", "alpha", "lambda", "step", "mean_rms", "stderr"});
    const auto variants = cfg.variants.empty() ? default_variants(kind) : cfg.variants;
    for (const std::string& variant : variants) {
      long best = -1;
      double best_mean = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].variant != variant) continue;
        const double m = summaries[c].final_mean;
        if (std::isfinite(m) && m < best_mean) {
          best_mean = m;
          best = static_cast<long>(c);
        }
      }
      if (best < 0) continue;
      const std::size_t n_points = results[static_cast<std::size_t>(best) *
                                           static_cast<std::size_t>(cfg.runs)]
                                       .series.points.size();
      for (std::size_t p = 0; p < n_points; ++p) {
        std::vector<double> values;
        long step = 0;
        bool complete = true;
        for (long run = 0; run < cfg.runs; ++run) {
          const TdRunResult& r = results[static_cast<std::size_t>(best) *
                                             static_cast<std::size_t>(cfg.runs) +
                                         static_cast<std::size_t>(run)];
          if (p >= r.series.points.size()) {
            complete = false;
            break;
          }
          step = r.series.points[p].step;
          values.push_back(r.series.points[p].value);
        }
        if (!complete) continue;
        const MeanStderr ms = mean_stderr(values);
        curves.row()
            .col(cfg.experiment)
            .col(variant)
            .col(cells[static_cast<std::size_t>(best)].alpha)
            .col(cells[static_cast<std::size_t>(best)].lambda)
            .col(step)
            .col(ms.mean)
            .col(ms.stderr_);
      }
    }
  }
}

}  // namespace internal

void run_pathworld(const ExperimentConfig& cfg) {
  internal::run_td_experiment(cfg, internal::TdExperimentKind::PathWorld);
}

void run_gridworld(const ExperimentConfig& cfg) {
  internal::run_td_experiment(cfg, internal::TdExperimentKind::GridTabular);
}

void run_gridworld_linear(const ExperimentConfig& cfg) {
  internal::run_td_experiment(cfg, internal::TdExperimentKind::GridLinear);
}

void run_emphatic(const ExperimentConfig& cfg) {
  internal::run_td_experiment(cfg, internal::TdExperimentKind::Emphatic);
}

void run_mc(const ExperimentConfig& cfg) {
  const auto dir = internal::prepare_out_dir(cfg);
  const long measure_every =
      cfg.measure_every > 0 ? cfg.measure_every : std::max<long>(1, cfg.episodes / 100);

  struct McRun {
    MetricSeries series;
    double final_rms{0.0};
    long truncated{0};
    std::uint64_t seed{0};
  };
  const long n_tasks = static_cast<long>(cfg.alphas.size()) * cfg.runs;
  std::vector<McRun> results(static_cast<std::size_t>(n_tasks));

  parallel_for(n_tasks, cfg.jobs, [&](long task) {
    const long cell_idx = task / cfg.runs;
    const long run = task % cfg.runs;
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(cell_idx),
                                           static_cast<std::uint64_t>(run));
    Rng rng(seed);
    EnvWithPolicies env = make_path_world(cfg.width, cfg.depth, cfg.beta, rng);
    if (cfg.on_policy) env.mu = env.pi;
    const Eigen::MatrixXd q_true = true_action_values(env.mdp, env.pi);

    McConfig mc;
    mc.alpha = cfg.alphas[static_cast<std::size_t>(cell_idx)];
    mc.gamma = cfg.gamma;
    mc.episodes = cfg.episodes;
    mc.max_steps = cfg.max_steps;
    mc.measure_every = measure_every;
    const EpisodicRunResult r = run_mc_first_visit(env.mdp, env.mu, env.pi, mc, rng, &q_true);

    McRun out;
    out.series = r.series;
    out.series.experiment = cfg.experiment;
    out.series.variant = "mc_sparho";
    out.series.cell = "alpha=" + format_double(mc.alpha);
    out.series.run = run;
    out.series.seed = seed;
    out.final_rms =
        r.series.points.empty() ? rms_error(r.value, q_true) : r.series.points.back().value;
    out.truncated = r.truncated_episodes;
    out.seed = seed;
    results[static_cast<std::size_t>(task)] = std::move(out);
  });

  CsvWriter raw((dir / "raw.csv").string(),
                {"experiment", "variant", "alpha", "run", "seed", "episode", "rms"});
  CsvWriter finals((dir / "finals.csv").string(),
                   {"experiment", "variant", "alpha", "run", "seed", "final_rms", "truncated"});
  for (long task = 0; task < n_tasks; ++task) {
    const double alpha = cfg.alphas[static_cast<std::size_t>(task / cfg.runs)];
    const McRun& r = results[static_cast<std::size_t>(task)];
    for (const MetricPoint& point : r.series.points)
      raw.row().col(cfg.experiment).col("mc_sparho").col(alpha).col(task % cfg.runs).col(r.seed).col(point.step).col(point.value);
    finals.row()
        .col(cfg.experiment)
        .col("mc_sparho")
        .col(alpha)
        .col(task % cfg.runs)
        .col(r.seed)
        .col(r.final_rms)
        .col(r.truncated);
  }
}

}  // namespace sparho
