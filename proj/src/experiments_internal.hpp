#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "sparho/experiments.hpp"
#include "sparho/metrics.hpp"

namespace sparho::internal {

/// Creates cfg.out, writes the normalized config echo, and returns the path.
std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg);

std::string cell_label(double alpha, double lambda);

/// One (variant, alpha, lambda) grid cell, enumerated in config order.
/// param_index identifies the (alpha, lambda) pair only: runs of different
/// variants in the same parameter cell share their random streams, so
/// variant comparisons are paired run by run.
struct TdCell {
  std::string variant;
  double alpha;
  double lambda;
  long param_index;
};
std::vector<TdCell> enumerate_cells(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& default_variants);

/// Result of a single TD-style run.
struct TdRunResult {
  MetricSeries series;  // "rms" measurements over environment steps
  double final_rms{0.0};
  double auc{0.0};
  bool diverged{false};
  long diverged_step{-1};
  std::uint64_t seed{0};
};

/// Drives one online learner over sampled episodes for `steps` transitions,
/// measuring RMS against q_true every `measure_every` steps and at the end.
template <typename Learner>
TdRunResult drive_learner(Learner& learner, const TabularMDP& mdp, const PolicyTable& mu,
                          const Eigen::MatrixXd& q_true, long steps, long measure_every,
                          long max_steps, Rng& rng) {
  TdRunResult result;
  long t = 0;
  double auc_sum = 0.0;
  long auc_count = 0;
  while (t < steps) {
    const Trajectory traj = sample_episode(mdp, mu, rng, max_steps);
    learner.begin_episode();
    for (const Step& st : traj.steps) {
      learner.step(st);
      ++t;
      if (t % measure_every == 0 || t == steps) {
        double rms = rms_error(learner.value(), q_true);
        if (!std::isfinite(rms)) rms = std::numeric_limits<double>::infinity();
        result.series.append(t, "rms", rms);
        auc_sum += rms;
        ++auc_count;
      }
      if (t >= steps) break;
    }
  }
  result.final_rms =
      result.series.points.empty() ? rms_error(learner.value(), q_true)
                                   : result.series.points.back().value;
  result.auc = auc_count > 0 ? auc_sum / static_cast<double>(auc_count) : result.final_rms;
  result.diverged = learner.diverged();
  result.diverged_step = learner.diverged_step();
  return result;
}

/// Shared runner behind the pathworld / gridworld / emphatic experiments.
enum class TdExperimentKind { PathWorld, GridTabular, GridLinear, Emphatic };
void run_td_experiment(const ExperimentConfig& cfg, TdExperimentKind kind);

}  // namespace sparho::internal
