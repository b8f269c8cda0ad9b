#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sparho/environments.hpp"

namespace sparho {

enum class Representation { Tabular, Linear };

/// Action-value estimate over a finite state space: either a dense
/// (state, action) table or per-action linear heads over binary features.
/// Values of terminal states are pinned at 0.
class ValueFunction {
 public:
  static ValueFunction tabular(int n_states, int n_actions, std::vector<std::uint8_t> terminal);
  static ValueFunction linear(FeatureMap features, int n_actions,
                              std::vector<std::uint8_t> terminal);

  Representation representation() const { return repr_; }
  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  bool is_terminal(int s) const { return terminal_[static_cast<std::size_t>(s)] != 0; }
  const std::vector<std::uint8_t>& terminal() const { return terminal_; }

  double q(int s, int a) const {
    if (is_terminal(s)) return 0.0;
    if (repr_ == Representation::Tabular) return params_(s, a);
    return features_.row(s).dot(params_.col(a));
  }

  /// Q(s, .) as a dense vector.
  Eigen::VectorXd action_values(int s) const {
    if (is_terminal(s)) return Eigen::VectorXd::Zero(n_actions_);
    if (repr_ == Representation::Tabular) return params_.row(s).transpose();
    return params_.transpose() * features_.row(s).transpose();
  }

  double expected_q(int s, const Eigen::Ref<const Eigen::RowVectorXd>& pi_row) const {
    if (is_terminal(s)) return 0.0;
    return pi_row.dot(action_values(s));
  }

  /// Learnable parameters: the (state, action) table, or the
  /// (feature, action) weight matrix for the linear representation.
  Eigen::MatrixXd& params() { return params_; }
  const Eigen::MatrixXd& params() const { return params_; }

  const FeatureMap& features() const { return features_; }

  /// Dense table view of the current estimate (evaluates the linear heads).
  Eigen::MatrixXd to_table() const;

  /// Gradient of q(s, a) with respect to params(), as (flat index, value)
  /// pairs into params().data().
  void gradient(int s, int a, std::vector<std::pair<Eigen::Index, double>>& out) const {
    out.clear();
    if (repr_ == Representation::Tabular) {
      out.emplace_back(static_cast<Eigen::Index>(a) * n_states_ + s, 1.0);
      return;
    }
    const Eigen::Index dim = params_.rows();
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double f = features_(s, d);
      if (f != 0.0) out.emplace_back(static_cast<Eigen::Index>(a) * dim + d, f);
    }
  }

  /// Fills non-terminal table entries with N(0, stddev) noise (tabular only).
  void randomize(Rng& rng, double stddev);

 private:
  Representation repr_{Representation::Tabular};
  int n_states_{0};
  int n_actions_{0};
  std::vector<std::uint8_t> terminal_;
  Eigen::MatrixXd params_;
  FeatureMap features_;
};

}  // namespace sparho
