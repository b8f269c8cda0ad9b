#include "sparho/experiments.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sparho {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

const std::set<std::string> kExperiments = {
    "bandit-sweep", "bandit-online", "pathworld",        "gridworld",
    "gridworld-linear", "emphatic",  "dynamics",         "mc"};

}  // namespace

void ExperimentConfig::validate() const {
  if (!kExperiments.count(experiment))
    throw std::invalid_argument("config: unknown experiment '" + experiment + "'");
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
  if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
  if (alphas.empty() || lambdas.empty())
    throw std::invalid_argument("config: parameter grids must be non-empty");
  if (experiment == "bandit-sweep" || experiment == "bandit-online") {
    if (action_sizes.empty()) throw std::invalid_argument("config: action_sizes must be non-empty");
    if (instances < 1) throw std::invalid_argument("config: instances must be >= 1");
  }
  if (beta <= 0.0) throw std::invalid_argument("config: beta must be positive");
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  if (dirs != "four" && dirs != "eight")
    throw std::invalid_argument("config: dirs must be 'four' or 'eight'");
  if (online_update != "scalar_v" && online_update != "per_action_q")
    throw std::invalid_argument("config: online_update must be 'scalar_v' or 'per_action_q'");
  if (experiment == "dynamics" && mdp_file.empty())
    throw std::invalid_argument("config: dynamics requires mdp_file");
  if (clip_lo > clip_hi) throw std::invalid_argument("config: clip_lo > clip_hi");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  read(j, "experiment", cfg.experiment);
  read(j, "seed", cfg.seed);
  read(j, "out", cfg.out);
  read(j, "jobs", cfg.jobs);
  read(j, "runs", cfg.runs);
  read(j, "steps", cfg.steps);
  read(j, "episodes", cfg.episodes);
  read(j, "measure_every", cfg.measure_every);
  read(j, "max_steps", cfg.max_steps);
  read(j, "alphas", cfg.alphas);
  read(j, "lambdas", cfg.lambdas);
  read(j, "variants", cfg.variants);
  read(j, "n_actions", cfg.n_actions);
  read(j, "beta", cfg.beta);
  read(j, "width", cfg.width);
  read(j, "depth", cfg.depth);
  read(j, "side", cfg.side);
  read(j, "dirs", cfg.dirs);
  read(j, "eps_pi", cfg.eps_pi);
  read(j, "eps_mu", cfg.eps_mu);
  read(j, "preferred_action", cfg.preferred_action);
  read(j, "on_policy", cfg.on_policy);
  read(j, "gamma", cfg.gamma);
  read(j, "action_sizes", cfg.action_sizes);
  read(j, "instances", cfg.instances);
  read(j, "online_update", cfg.online_update);
  read(j, "online_alpha", cfg.online_alpha);
  read(j, "mdp_file", cfg.mdp_file);
  read(j, "nsteps", cfg.nsteps);
  read(j, "field_alpha", cfg.field_alpha);
  read(j, "grid_points", cfg.grid_points);
  read(j, "grid_min", cfg.grid_min);
  read(j, "grid_max", cfg.grid_max);
  read(j, "iterate_steps", cfg.iterate_steps);
  read(j, "clip_lo", cfg.clip_lo);
  read(j, "clip_hi", cfg.clip_hi);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out;
  j["jobs"] = cfg.jobs;
  j["runs"] = cfg.runs;
  j["steps"] = cfg.steps;
  j["episodes"] = cfg.episodes;
  j["measure_every"] = cfg.measure_every;
  j["max_steps"] = cfg.max_steps;
  j["alphas"] = cfg.alphas;
  j["lambdas"] = cfg.lambdas;
  j["variants"] = cfg.variants;
  j["n_actions"] = cfg.n_actions;
  j["beta"] = cfg.beta;
  j["width"] = cfg.width;
  j["depth"] = cfg.depth;
  j["side"] = cfg.side;
  j["dirs"] = cfg.dirs;
  j["eps_pi"] = cfg.eps_pi;
  j["eps_mu"] = cfg.eps_mu;
  j["preferred_action"] = cfg.preferred_action;
  j["on_policy"] = cfg.on_policy;
  j["gamma"] = cfg.gamma;
  j["action_sizes"] = cfg.action_sizes;
  j["instances"] = cfg.instances;
  j["online_update"] = cfg.online_update;
  j["online_alpha"] = cfg.online_alpha;
  j["mdp_file"] = cfg.mdp_file;
  j["nsteps"] = cfg.nsteps;
  j["field_alpha"] = cfg.field_alpha;
  j["grid_points"] = cfg.grid_points;
  j["grid_min"] = cfg.grid_min;
  j["grid_max"] = cfg.grid_max;
  j["iterate_steps"] = cfg.iterate_steps;
  j["clip_lo"] = cfg.clip_lo;
  j["clip_hi"] = cfg.clip_hi;
  return j.dump(2) + "\n";
}

}  // namespace sparho
