#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparho/value_function.hpp"

namespace sparho {

/// Unweighted RMS over all non-terminal (state, action) pairs.
double rms_error(const Eigen::MatrixXd& q, const Eigen::MatrixXd& q_true,
                 const std::vector<std::uint8_t>& terminal);
double rms_error(const ValueFunction& q, const Eigen::MatrixXd& q_true);

struct MetricPoint {
  long step;
  std::string metric;
  double value;
};

/// Time-indexed measurements of one run, with enough provenance to rerun it.
struct MetricSeries {
  std::string experiment;
  std::string variant;
  std::string cell;  // "alpha=0.1,lambda=0.5"
  long run{0};
  std::uint64_t seed{0};
  std::vector<MetricPoint> points;

  /// Appends a point; steps must be strictly increasing per metric name.
  void append(long step, const std::string& metric, double value);
};

struct RunSummary {
  std::string experiment;
  std::string variant;
  std::string cell;
  long runs{0};
  double final_mean{0.0}, final_stderr{0.0};
  double auc_mean{0.0}, auc_stderr{0.0};
};

struct MeanStderr {
  double mean{0.0};
  double stderr_{0.0};
};

/// Sample mean and standard error (sample std / sqrt(n)).
MeanStderr mean_stderr(const std::vector<double>& values);

/// Aggregates per-run series of one cell into final-value and mean-over-steps
/// (AUC) statistics. Non-finite finals propagate into the mean.
RunSummary summarize_runs(const std::string& experiment, const std::string& variant,
                          const std::string& cell, const std::vector<double>& finals,
                          const std::vector<double>& aucs);

}  // namespace sparho
