#include "sparho/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sparho {

double rms_error(const Eigen::MatrixXd& q, const Eigen::MatrixXd& q_true,
                 const std::vector<std::uint8_t>& terminal) {
  if (q.rows() != q_true.rows() || q.cols() != q_true.cols() ||
      static_cast<Eigen::Index>(terminal.size()) != q.rows())
    throw std::invalid_argument("rms_error: index set mismatch");
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    if (terminal[static_cast<std::size_t>(s)]) continue;
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      const double d = q(s, a) - q_true(s, a);
      sum += d * d;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("rms_error: no non-terminal pairs");
  return std::sqrt(sum / static_cast<double>(count));
}

double rms_error(const ValueFunction& q, const Eigen::MatrixXd& q_true) {
  return rms_error(q.to_table(), q_true, q.terminal());
}

void MetricSeries::append(long step, const std::string& metric, double value) {
  for (auto it = points.rbegin(); it != points.rend(); ++it) {
    if (it->metric == metric) {
      if (step <= it->step)
        throw std::invalid_argument("MetricSeries: steps must be strictly increasing");
      break;
    }
  }
  points.push_back(MetricPoint{step, metric, value});
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  double sum = 0.0;
  for (const double v : values) sum += v;
  out.mean = sum / static_cast<double>(n);
  if (n == 1) return out;
  double ss = 0.0;
  for (const double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  return out;
}

RunSummary summarize_runs(const std::string& experiment, const std::string& variant,
                          const std::string& cell, const std::vector<double>& finals,
                          const std::vector<double>& aucs) {
  RunSummary s;
  s.experiment = experiment;
  s.variant = variant;
  s.cell = cell;
  s.runs = static_cast<long>(finals.size());
  const MeanStderr f = mean_stderr(finals);
  const MeanStderr a = mean_stderr(aucs);
  s.final_mean = f.mean;
  s.final_stderr = f.stderr_;
  s.auc_mean = a.mean;
  s.auc_stderr = a.stderr_;
  return s;
}

}  // namespace sparho
