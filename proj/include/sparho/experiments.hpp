#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sparho/learners.hpp"

namespace sparho {

/// One experiment description: parameter grids, scale, seeding, and output
/// location. Parsed from a JSON config file; fields not used by an
/// experiment are ignored by it.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed{0};
  std::string out{"results"};
  int jobs{1};

  long runs{1};
  long steps{1};
  long episodes{1};
  long measure_every{0};  // 0 picks a cadence from the scale
  long max_steps{1000000};

  std::vector<double> alphas{0.1};
  std::vector<double> lambdas{0.0};
  std::vector<std::string> variants;

  // Environment parameters.
  int n_actions{8};
  double beta{2.0};
  int width{8};
  int depth{5};
  int side{5};
  std::string dirs{"four"};
  double eps_pi{0.5};
  double eps_mu{1.0};
  int preferred_action{-1};  // -1 draws one action id per run
  bool on_policy{false};     // replace mu by pi everywhere
  double gamma{1.0};

  // Bandit studies.
  std::vector<long> action_sizes{2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  long instances{10000};
  std::string online_update{"scalar_v"};  // or "per_action_q"
  double online_alpha{0.01};

  // Dynamics studies.
  std::string mdp_file;
  std::vector<int> nsteps{4, 8, 16};
  double field_alpha{0.1};
  int grid_points{21};
  double grid_min{-1.0};
  double grid_max{1.0};
  long iterate_steps{100};

  double clip_lo{0.0};
  double clip_hi{1.0};

  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);

/// Runs tasks 0..n-1 on `jobs` threads. Tasks must not share mutable state;
/// results are written into preallocated slots so output order never depends
/// on scheduling.
void parallel_for(long n_tasks, int jobs, const std::function<void(long)>& task);

void run_bandit_sweep(const ExperimentConfig& cfg);
void run_bandit_online(const ExperimentConfig& cfg);
void run_pathworld(const ExperimentConfig& cfg);
void run_gridworld(const ExperimentConfig& cfg);
void run_gridworld_linear(const ExperimentConfig& cfg);
void run_emphatic(const ExperimentConfig& cfg);
void run_dynamics(const ExperimentConfig& cfg);
void run_mc(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment.
void run_experiment(const ExperimentConfig& cfg);

}  // namespace sparho
