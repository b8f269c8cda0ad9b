#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sparho/experiments.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::uint64_t seed{0};
  bool seed_set{false};
  std::string out;
  int jobs{0};
};

void add_subcommand(CLI::App& app, const std::string& name, const std::string& description,
                    std::vector<std::pair<std::string, CliOverrides>>& requests) {
  auto* sub = app.add_subcommand(name, description);
  auto overrides = std::make_shared<CliOverrides>();
  sub->add_option("--config", overrides->config_path, "experiment config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = sub->add_option("--seed", overrides->seed, "master seed override");
  sub->add_option("--out", overrides->out, "output directory override");
  sub->add_option("--jobs", overrides->jobs, "worker thread count override");
  sub->callback([&requests, name, overrides, seed_opt]() {
    overrides->seed_set = seed_opt->count() > 0;
    requests.emplace_back(name, *overrides);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparho: off-policy prediction workbench with value-aware importance weights"};
  app.require_subcommand(1);

  std::vector<std::pair<std::string, CliOverrides>> requests;
  add_subcommand(app, "bandit-sweep", "closed-form weight statistics across action-space sizes",
                 requests);
  add_subcommand(app, "bandit-online", "online scalar estimation on random bandits", requests);
  add_subcommand(app, "pathworld", "lambda-learner sweep on the layered path environment",
                 requests);
  add_subcommand(app, "gridworld", "tabular lambda-learner sweep on the grid world", requests);
  add_subcommand(app, "gridworld-linear", "linear-features sweep on the 8-direction grid world",
                 requests);
  add_subcommand(app, "emphatic", "emphatic Q(lambda) sweep on the grid world", requests);
  add_subcommand(app, "dynamics", "expected-update vector fields on a custom MDP", requests);
  add_subcommand(app, "mc", "first-visit Monte Carlo on the path environment", requests);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, overrides] : requests) {
      sparho::ExperimentConfig cfg = sparho::load_config(overrides.config_path);
      cfg.experiment = name;
      if (overrides.seed_set) cfg.seed = overrides.seed;
      // Precedence: flag > environment variable > config file.
      if (!overrides.out.empty()) {
        cfg.out = overrides.out;
      } else if (const char* env_out = std::getenv("SPARHO_OUT")) {
        cfg.out = env_out;
      }
      if (overrides.jobs > 0) {
        cfg.jobs = overrides.jobs;
      } else if (const char* env_jobs = std::getenv("SPARHO_JOBS")) {
        cfg.jobs = std::max(1, std::atoi(env_jobs));
      }
      sparho::run_experiment(cfg);
      std::cout << name << ": results written to " << cfg.out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
