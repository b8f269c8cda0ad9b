#include "sparho/value_function.hpp"

namespace sparho {

ValueFunction ValueFunction::tabular(int n_states, int n_actions,
                                     std::vector<std::uint8_t> terminal) {
  if (static_cast<int>(terminal.size()) != n_states)
    throw std::invalid_argument("ValueFunction: terminal mask size mismatch");
  ValueFunction vf;
  vf.repr_ = Representation::Tabular;
  vf.n_states_ = n_states;
  vf.n_actions_ = n_actions;
  vf.terminal_ = std::move(terminal);
  vf.params_ = Eigen::MatrixXd::Zero(n_states, n_actions);
  return vf;
}

ValueFunction ValueFunction::linear(FeatureMap features, int n_actions,
                                    std::vector<std::uint8_t> terminal) {
  if (static_cast<int>(terminal.size()) != features.rows())
    throw std::invalid_argument("ValueFunction: terminal mask size mismatch");
  ValueFunction vf;
  vf.repr_ = Representation::Linear;
  vf.n_states_ = static_cast<int>(features.rows());
  vf.n_actions_ = n_actions;
  vf.terminal_ = std::move(terminal);
  vf.features_ = std::move(features);
  vf.params_ = Eigen::MatrixXd::Zero(vf.features_.cols(), n_actions);
  return vf;
}

Eigen::MatrixXd ValueFunction::to_table() const {
  if (repr_ == Representation::Tabular) {
    Eigen::MatrixXd table = params_;
    for (int s = 0; s < n_states_; ++s)
      if (is_terminal(s)) table.row(s).setZero();
    return table;
  }
  Eigen::MatrixXd table = features_ * params_;
  for (int s = 0; s < n_states_; ++s)
    if (is_terminal(s)) table.row(s).setZero();
  return table;
}

void ValueFunction::randomize(Rng& rng, double stddev) {
  if (repr_ != Representation::Tabular)
    throw std::invalid_argument("ValueFunction::randomize: tabular only");
  for (int s = 0; s < n_states_; ++s) {
    if (is_terminal(s)) continue;
    for (int a = 0; a < n_actions_; ++a) params_(s, a) = rng.normal(0.0, stddev);
  }
}

}  // namespace sparho
