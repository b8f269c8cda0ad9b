#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "sparho/csv.hpp"
#include "sparho/experiments.hpp"
#include "sparho/metrics.hpp"

using namespace sparho;
namespace fs = std::filesystem;

namespace {

using CsvRows = std::vector<std::map<std::string, std::string>>;

CsvRows read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  CsvRows rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::map<std::string, std::string> row;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) row[header.at(i++)] = cell;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::current_path() / "harness_test_out" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("rms_error: frozen examples") {
  std::vector<std::uint8_t> terminal = {0, 0, 0};
  Eigen::MatrixXd q(3, 1), t(3, 1);
  q << 0, 0, 0;
  t << 1, 2, 2;
  CHECK(rms_error(q, q, terminal) == 0.0);
  CHECK(rms_error((q.array() + 1).matrix(), q, terminal) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rms_error(q, t, terminal) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  Eigen::MatrixXd wrong(2, 1);
  CHECK_THROWS_AS(rms_error(wrong, t, terminal), std::invalid_argument);
}

TEST_CASE("format_double round-trips and is stable") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  const double ugly = 0.1 + 0.2;
  CHECK(std::stod(format_double(ugly)) == ugly);
}

TEST_CASE("config: parsing, defaults, validation") {
  const ExperimentConfig cfg = parse_config(R"({
    "experiment": "pathworld", "seed": 7, "runs": 3, "steps": 100,
    "alphas": [0.1, 0.2], "lambdas": [0.5]
  })");
  CHECK(cfg.seed == 7);
  CHECK(cfg.runs == 3);
  CHECK(cfg.alphas.size() == 2);
  CHECK(cfg.width == 8);  // default
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig bad = cfg;
  bad.alphas.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.experiment = "nope";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("{not json"), std::invalid_argument);

  // Round-trip through the echo format.
  const ExperimentConfig echoed = parse_config(config_to_json(cfg));
  CHECK(echoed.seed == cfg.seed);
  CHECK(echoed.alphas == cfg.alphas);
}

TEST_CASE("bandit-sweep: paired statistics and dominance in the output") {
  ExperimentConfig cfg;
  cfg.experiment = "bandit-sweep";
  cfg.seed = 11;
  cfg.out = fresh_dir("sweep").string();
  cfg.action_sizes = {2, 8};
  cfg.instances = 300;
  cfg.beta = 2.0;
  run_experiment(cfg);

  const CsvRows raw = read_csv(fs::path(cfg.out) / "raw.csv");
  CHECK(raw.size() == 2 * 300 * 4);

  // Index raw rows by (size, instance, estimator).
  std::map<std::string, std::map<std::string, double>> by_key;
  for (const auto& row : raw)
    by_key[row.at("n_actions") + "/" + row.at("instance") + "/" + row.at("estimator")] = {
        {"var_w", std::stod(row.at("var_w"))},
        {"var_wq", std::stod(row.at("var_wq"))},
        {"mean_w", std::stod(row.at("mean_w"))},
        {"bias", std::stod(row.at("bias"))}};

  for (long i = 0; i < 300; ++i) {
    const std::string k2 = "2/" + std::to_string(i) + "/";
    // Two actions: sparho and is coincide.
    CHECK(std::abs(by_key[k2 + "sparho"]["var_wq"] - by_key[k2 + "is"]["var_wq"]) <
          1e-9 * (1.0 + by_key[k2 + "is"]["var_wq"]));
    for (const std::string size : {"2", "8"}) {
      const std::string key = size + "/" + std::to_string(i) + "/";
      CHECK(by_key[key + "sparho"]["var_w"] <= by_key[key + "is"]["var_w"] + 1e-12);
      // Unclipped estimators are unbiased; clipped mean weight is at most 1.
      CHECK(std::abs(by_key[key + "is"]["bias"]) < 1e-10);
      CHECK(std::abs(by_key[key + "sparho"]["bias"]) < 1e-10);
      CHECK(by_key[key + "clipped_is"]["mean_w"] <= 1.0 + 1e-12);
      CHECK(by_key[key + "clipped_sparho"]["mean_w"] <= 1.0 + 1e-12);
    }
  }

  const CsvRows summary = read_csv(fs::path(cfg.out) / "summary.csv");
  CHECK(summary.size() == 2 * 4);
}

TEST_CASE("bandit-online: zero step size freezes the error curves") {
  ExperimentConfig cfg;
  cfg.experiment = "bandit-online";
  cfg.seed = 13;
  cfg.out = fresh_dir("online_flat").string();
  cfg.runs = 3;
  cfg.steps = 50;
  cfg.n_actions = 4;
  cfg.online_alpha = 0.0;
  run_experiment(cfg);

  const CsvRows raw = read_csv(fs::path(cfg.out) / "raw.csv");
  std::map<std::string, std::set<std::string>> errors_by_run;
  for (const auto& row : raw)
    errors_by_run[row.at("estimator") + "/" + row.at("run")].insert(row.at("abs_error"));
  for (const auto& [key, values] : errors_by_run) CHECK(values.size() == 1);
}

TEST_CASE("bandit-online: on-policy closed-form estimators coincide; RIS stays sane") {
  ExperimentConfig cfg;
  cfg.experiment = "bandit-online";
  cfg.seed = 17;
  cfg.out = fresh_dir("online_onpolicy").string();
  cfg.runs = 5;
  cfg.steps = 400;
  cfg.n_actions = 6;
  cfg.on_policy = true;
  run_experiment(cfg);

  const CsvRows raw = read_csv(fs::path(cfg.out) / "raw.csv");
  // Group final errors by run.
  std::map<std::string, std::map<std::string, std::string>> finals;
  for (const auto& row : raw)
    finals[row.at("run")][row.at("estimator")] = row.at("abs_error");  // last wins
  for (auto& [run, by_est] : finals) {
    CHECK(by_est.at("is") == by_est.at("sparho"));
    CHECK(by_est.at("is") == by_est.at("clipped_is"));
    CHECK(by_est.at("is") == by_est.at("clipped_sparho"));
    // RIS weights are not identically one, but learning still progresses.
    CHECK(std::stod(by_est.at("ris_is")) < 10.0);
  }
}

TEST_CASE("bandit-online: clipping leaves persistent error off-policy") {
  ExperimentConfig cfg;
  cfg.experiment = "bandit-online";
  cfg.seed = 19;
  cfg.out = fresh_dir("online_bias").string();
  cfg.runs = 40;
  cfg.steps = 3000;
  cfg.n_actions = 8;
  cfg.beta = 2.0;
  cfg.online_alpha = 0.01;
  cfg.variants = {"is", "clipped_is"};
  run_experiment(cfg);

  const CsvRows curves = read_csv(fs::path(cfg.out) / "curves.csv");
  double final_is = -1.0, final_clipped = -1.0;
  for (const auto& row : curves) {
    if (row.at("step") != "3000") continue;
    if (row.at("estimator") == "is") final_is = std::stod(row.at("mean_abs_error"));
    if (row.at("estimator") == "clipped_is") final_clipped = std::stod(row.at("mean_abs_error"));
  }
  REQUIRE(final_is >= 0.0);
  REQUIRE(final_clipped >= 0.0);
  CHECK(final_clipped > final_is);
}

TEST_CASE("pathworld: on-policy override collapses the variants") {
  ExperimentConfig cfg;
  cfg.experiment = "pathworld";
  cfg.seed = 23;
  cfg.out = fresh_dir("pw_onpolicy").string();
  cfg.runs = 2;
  cfg.steps = 600;
  cfg.width = 4;
  cfg.depth = 3;
  cfg.beta = 1.0;
  cfg.alphas = {0.3};
  cfg.lambdas = {0.875};
  cfg.on_policy = true;
  run_experiment(cfg);

  const CsvRows finals = read_csv(fs::path(cfg.out) / "finals.csv");
  std::map<std::string, std::set<std::string>> by_run;
  for (const auto& row : finals) by_run[row.at("run")].insert(row.at("final_rms"));
  for (const auto& [run, values] : by_run) CHECK(values.size() == 1);
}

TEST_CASE("pathworld: lambda 0 cells coincide across variants") {
  ExperimentConfig cfg;
  cfg.experiment = "pathworld";
  cfg.seed = 29;
  cfg.out = fresh_dir("pw_lambda0").string();
  cfg.runs = 2;
  cfg.steps = 500;
  cfg.width = 4;
  cfg.depth = 3;
  cfg.beta = 1.0;
  cfg.alphas = {0.4};
  cfg.lambdas = {0.0};
  run_experiment(cfg);

  const CsvRows finals = read_csv(fs::path(cfg.out) / "finals.csv");
  std::map<std::string, std::set<std::string>> by_run;
  for (const auto& row : finals) by_run[row.at("run")].insert(row.at("final_rms"));
  for (const auto& [run, values] : by_run) CHECK(values.size() == 1);
}

TEST_CASE("reproducibility: jobs do not change the bytes") {
  for (const int jobs : {1, 3}) {
    ExperimentConfig cfg;
    cfg.experiment = "gridworld";
    cfg.seed = 31;
    cfg.out = fresh_dir("grid_jobs" + std::to_string(jobs)).string();
    cfg.jobs = jobs;
    cfg.runs = 4;
    cfg.steps = 400;
    cfg.side = 3;
    cfg.alphas = {0.2};
    cfg.lambdas = {0.5, 0.875};
    run_experiment(cfg);
  }
  for (const std::string file : {"raw.csv", "finals.csv", "summary.csv", "curves.csv"}) {
    CHECK(read_file(fs::current_path() / "harness_test_out" / "grid_jobs1" / file) ==
          read_file(fs::current_path() / "harness_test_out" / "grid_jobs3" / file));
  }
}

TEST_CASE("dynamics runner: determinism and IS arrows aimed at v_pi") {
  const std::string mdp_path = std::string(SPARHO_SOURCE_DIR) + "/data/mdps/two_state.json";
  for (const std::string name : {"dyn1", "dyn2"}) {
    ExperimentConfig cfg;
    cfg.experiment = "dynamics";
    cfg.seed = 37;
    cfg.out = fresh_dir(name).string();
    cfg.mdp_file = mdp_path;
    cfg.grid_points = 7;
    cfg.grid_min = -1.0;
    cfg.grid_max = 1.0;
    cfg.nsteps = {4};
    cfg.iterate_steps = 50;
    run_experiment(cfg);
  }
  CHECK(read_file(fs::current_path() / "harness_test_out" / "dyn1" / "field.csv") ==
        read_file(fs::current_path() / "harness_test_out" / "dyn2" / "field.csv"));
  CHECK(read_file(fs::current_path() / "harness_test_out" / "dyn1" / "trajectories.csv") ==
        read_file(fs::current_path() / "harness_test_out" / "dyn2" / "trajectories.csv"));

  // v_pi from the summary, then check the IS Monte Carlo field sign pattern.
  const std::string summary =
      read_file(fs::current_path() / "harness_test_out" / "dyn2" / "summary.json");
  const auto j = nlohmann::json::parse(summary);
  const double v1_pi = j.at("v_pi").at(0).get<double>();
  const double v2_pi = j.at("v_pi").at(1).get<double>();

  const CsvRows field = read_csv(fs::current_path() / "harness_test_out" / "dyn2" / "field.csv");
  CHECK(!field.empty());
  for (const auto& row : field) {
    if (row.at("variant") != "is_mc") continue;
    const double v1 = std::stod(row.at("v1_start"));
    const double v2 = std::stod(row.at("v2_start"));
    const double d1 = std::stod(row.at("v1_delta"));
    const double d2 = std::stod(row.at("v2_delta"));
    CHECK(d1 * (v1_pi - v1) >= -1e-12);
    CHECK(d2 * (v2_pi - v2) >= -1e-12);
  }
}

TEST_CASE("mc runner: writes deterministic curves") {
  for (const std::string name : {"mc1", "mc2"}) {
    ExperimentConfig cfg;
    cfg.experiment = "mc";
    cfg.seed = 41;
    cfg.out = fresh_dir(name).string();
    cfg.runs = 2;
    cfg.episodes = 200;
    cfg.width = 2;
    cfg.depth = 2;
    cfg.beta = 1.0;
    cfg.alphas = {0.1};
    run_experiment(cfg);
  }
  CHECK(read_file(fs::current_path() / "harness_test_out" / "mc1" / "raw.csv") ==
        read_file(fs::current_path() / "harness_test_out" / "mc2" / "raw.csv"));
  const CsvRows finals = read_csv(fs::current_path() / "harness_test_out" / "mc1" / "finals.csv");
  CHECK(finals.size() == 2);
}

TEST_CASE("metric series and summaries behave") {
  MetricSeries series;
  series.append(10, "rms", 1.0);
  series.append(20, "rms", 0.5);
  series.append(20, "other", 3.0);  // different metric may share the step
  CHECK_THROWS_AS(series.append(20, "rms", 0.4), std::invalid_argument);
  CHECK_THROWS_AS(series.append(5, "rms", 0.4), std::invalid_argument);

  const MeanStderr ms = mean_stderr({1.0, 2.0, 3.0, 4.0});
  CHECK(ms.mean == doctest::Approx(2.5));
  // sample std = sqrt(5/3), stderr = that / 2
  CHECK(ms.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("summary aggregates are recomputable from the finals rows") {
  ExperimentConfig cfg;
  cfg.experiment = "pathworld";
  cfg.seed = 47;
  cfg.out = fresh_dir("pw_recompute").string();
  cfg.runs = 5;
  cfg.steps = 300;
  cfg.width = 3;
  cfg.depth = 2;
  cfg.beta = 1.0;
  cfg.alphas = {0.3};
  cfg.lambdas = {0.5};
  cfg.variants = {"sparho_lambda"};
  run_experiment(cfg);

  const CsvRows finals = read_csv(fs::path(cfg.out) / "finals.csv");
  std::vector<double> values;
  for (const auto& row : finals) values.push_back(std::stod(row.at("final_rms")));
  const MeanStderr ms = mean_stderr(values);

  const CsvRows summary = read_csv(fs::path(cfg.out) / "summary.csv");
  REQUIRE(summary.size() == 1);
  CHECK(std::stod(summary[0].at("final_mean")) == doctest::Approx(ms.mean).epsilon(1e-12));
  CHECK(std::stod(summary[0].at("final_stderr")) == doctest::Approx(ms.stderr_).epsilon(1e-12));
}

TEST_CASE("pathworld desk run keeps the variant ordering") {
  ExperimentConfig cfg;
  cfg.experiment = "pathworld";
  cfg.seed = 100;
  cfg.out = fresh_dir("pw_order").string();
  cfg.runs = 10;
  cfg.steps = 10000;
  cfg.width = 8;
  cfg.depth = 5;
  cfg.beta = 1.0;
  cfg.alphas = {0.3};
  cfg.lambdas = {0.875};
  cfg.measure_every = 10000;
  run_experiment(cfg);

  const CsvRows summary = read_csv(fs::path(cfg.out) / "summary.csv");
  std::map<std::string, double> finals;
  for (const auto& row : summary) finals[row.at("variant")] = std::stod(row.at("final_mean"));
  // At a large trace-decay rate the unclipped IS learner suffers most, and
  // the clipped value-aware learner stays at or below its IS counterpart on
  // the shared streams.
  CHECK(finals.at("sparho_lambda") < finals.at("q_lambda"));
  CHECK(finals.at("resparho_lambda") <= finals.at("retrace_lambda"));
}

TEST_CASE("emphatic and linear grid-world runners produce deterministic files") {
  for (const std::string& experiment : {std::string("emphatic"), std::string("gridworld-linear")}) {
    std::vector<std::string> bytes;
    for (const std::string& tag : {"a", "b"}) {
      ExperimentConfig cfg;
      cfg.experiment = experiment;
      cfg.seed = 51;
      cfg.out = fresh_dir(experiment + "_" + tag).string();
      cfg.runs = 2;
      cfg.steps = 600;
      cfg.side = 5;
      cfg.dirs = experiment == "gridworld-linear" ? "eight" : "four";
      cfg.eps_pi = 0.5;
      cfg.eps_mu = experiment == "gridworld-linear" ? 0.5 : 1.0;
      cfg.alphas = {0.05};
      cfg.lambdas = {0.5};
      run_experiment(cfg);
      bytes.push_back(read_file(fs::path(cfg.out) / "finals.csv"));
    }
    CHECK(bytes[0] == bytes[1]);
    CHECK(!bytes[0].empty());
  }
}
