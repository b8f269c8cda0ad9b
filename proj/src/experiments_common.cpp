#include "experiments_internal.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sparho/csv.hpp"

namespace sparho {

void parallel_for(long n_tasks, int jobs, const std::function<void(long)>& task) {
  if (jobs <= 1 || n_tasks <= 1) {
    for (long i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (true) {
      const long i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int n_threads = static_cast<int>(std::min<long>(jobs, n_tasks));
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

void run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.experiment == "bandit-sweep") return run_bandit_sweep(cfg);
  if (cfg.experiment == "bandit-online") return run_bandit_online(cfg);
  if (cfg.experiment == "pathworld") return run_pathworld(cfg);
  if (cfg.experiment == "gridworld") return run_gridworld(cfg);
  if (cfg.experiment == "gridworld-linear") return run_gridworld_linear(cfg);
  if (cfg.experiment == "emphatic") return run_emphatic(cfg);
  if (cfg.experiment == "dynamics") return run_dynamics(cfg);
  if (cfg.experiment == "mc") return run_mc(cfg);
  throw std::invalid_argument("run_experiment: unknown experiment " + cfg.experiment);
}

namespace internal {

std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  std::ofstream echo(dir / "config.json");
  if (!echo) throw std::runtime_error("cannot write config echo in " + cfg.out);
  echo << config_to_json(cfg);
  return dir;
}

std::string cell_label(double alpha, double lambda) {
  // Semicolon separator: the label is itself a CSV cell.
  return "alpha=" + format_double(alpha) + ";lambda=" + format_double(lambda);
}

std::vector<TdCell> enumerate_cells(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& default_variants) {
  const std::vector<std::string>& variants =
      cfg.variants.empty() ? default_variants : cfg.variants;
  std::vector<TdCell> cells;
  for (const std::string& v : variants) {
    long param_index = 0;
    for (const double alpha : cfg.alphas)
      for (const double lambda : cfg.lambdas)
        cells.push_back(TdCell{v, alpha, lambda, param_index++});
  }
  return cells;
}

}  // namespace internal

}  // namespace sparho
