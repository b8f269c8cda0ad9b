#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sparho/mdp.hpp"
#include "sparho/metrics.hpp"
#include "sparho/value_function.hpp"
#include "sparho/weights.hpp"

namespace sparho {

enum class LearnerVariant {
  QLambda,
  SparhoLambda,
  RetraceLambda,
  ReSparhoLambda,
  EmphaticQ,
  MC,
  NStep,
};

const char* to_string(LearnerVariant v);

/// Trace-decay weight family implied by each lambda-return variant.
WeightKind lambda_weight_kind(LearnerVariant v);

struct LearnerConfig {
  LearnerVariant variant{LearnerVariant::SparhoLambda};
  double alpha{0.1};
  double lambda{0.0};
  double gamma{1.0};
  std::optional<std::pair<double, double>> clip;  // present iff a clipped variant
  WeightKind weights{WeightKind::Sparho};         // EmphaticQ / MC / NStep weight family
  int nstep{1};

  void validate() const;
};

/// Expected Sarsa TD error for one transition; the bootstrap term is 0 when
/// the successor is terminal.
double td_error_expected_sarsa(const ValueFunction& q, const PolicyTable& pi, const Step& step,
                               double gamma);

/// Per-action weight of the taken action under `kind`, computed from the
/// current action values of the pair's state.
double step_weight(WeightKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& mu_row,
                   const Eigen::Ref<const Eigen::RowVectorXd>& pi_row,
                   const Eigen::Ref<const Eigen::VectorXd>& q_row, int action,
                   double clip_lo = 0.0, double clip_hi = 1.0);

namespace detail {

/// Accumulating eligibility trace over the parameter vector. Only entries
/// touched since the last reset are stored, so decay is O(active).
class AccumulatingTrace {
 public:
  explicit AccumulatingTrace(Eigen::Index size)
      : values_(Eigen::VectorXd::Zero(size)), in_set_(static_cast<std::size_t>(size), 0) {}

  void reset() {
    for (const Eigen::Index idx : active_) {
      values_[idx] = 0.0;
      in_set_[static_cast<std::size_t>(idx)] = 0;
    }
    active_.clear();
  }

  void decay(double factor) {
    for (const Eigen::Index idx : active_) values_[idx] *= factor;
  }

  void add(Eigen::Index idx, double g) {
    if (!in_set_[static_cast<std::size_t>(idx)]) {
      in_set_[static_cast<std::size_t>(idx)] = 1;
      active_.push_back(idx);
    }
    values_[idx] += g;
  }

  const std::vector<Eigen::Index>& active() const { return active_; }
  double value(Eigen::Index idx) const { return values_[idx]; }

 private:
  Eigen::VectorXd values_;
  std::vector<Eigen::Index> active_;
  std::vector<std::uint8_t> in_set_;
};

}  // namespace detail

/// Backward-view TD(lambda) over Expected Sarsa TD errors. Each step decays
/// the trace by gamma * lambda * w_t (w_t computed for the current pair from
/// the current action values), adds the gradient of Q(S_t, A_t), and moves
/// the parameters by alpha * delta_t * trace. Summed over an episode with
/// frozen values this reproduces the forward-view lambda-return targets.
class TdLambdaLearner {
 public:
  TdLambdaLearner(ValueFunction value, LearnerConfig config, PolicyTable mu, PolicyTable pi);

  void begin_episode();
  void step(const Step& transition);

  const ValueFunction& value() const { return value_; }
  ValueFunction& value() { return value_; }

  /// When set, updates accumulate into `sink` (same shape as params()) and
  /// the value estimate itself stays frozen.
  void set_update_sink(Eigen::MatrixXd* sink) { sink_ = sink; }

  bool diverged() const { return diverged_; }
  long diverged_step() const { return diverged_step_; }
  long steps_taken() const { return step_count_; }

 private:
  double pair_weight(int s, int a) const;

  ValueFunction value_;
  LearnerConfig config_;
  WeightKind kind_;
  double clip_lo_{0.0}, clip_hi_{1.0};
  PolicyTable mu_, pi_;
  detail::AccumulatingTrace trace_;
  Eigen::MatrixXd* sink_{nullptr};
  std::vector<std::pair<Eigen::Index, double>> grad_;
  bool diverged_{false};
  long diverged_step_{-1};
  long step_count_{0};
};

/// Emphatic Q(lambda): followon F_t = gamma * w_{t-1} * F_{t-1} + i(S_t),
/// emphasis M_t = lambda * i(S_t) + (1 - lambda) * F_t, trace decay
/// gamma * lambda * w_t with M_t-scaled gradient accumulation.
class EmphaticLearner {
 public:
  EmphaticLearner(ValueFunction value, LearnerConfig config, PolicyTable mu, PolicyTable pi,
                  Eigen::VectorXd interest = Eigen::VectorXd());

  void begin_episode();
  void step(const Step& transition);

  const ValueFunction& value() const { return value_; }
  double followon() const { return followon_; }
  double emphasis() const { return emphasis_; }

  bool diverged() const { return diverged_; }
  long diverged_step() const { return diverged_step_; }

 private:
  double interest_of(int s) const {
    return interest_.size() == 0 ? 1.0 : interest_[s];
  }

  ValueFunction value_;
  LearnerConfig config_;
  double clip_lo_{0.0}, clip_hi_{1.0};
  PolicyTable mu_, pi_;
  Eigen::VectorXd interest_;
  detail::AccumulatingTrace trace_;
  std::vector<std::pair<Eigen::Index, double>> grad_;
  double followon_{0.0};
  double emphasis_{0.0};
  double prev_weight_{0.0};
  bool diverged_{false};
  long diverged_step_{-1};
  long step_count_{0};
};

enum class LambdaReturnForm {
  ControlVariate,    // bootstraps on E_pi[Q(S', .)] with a zero-mean correction
  SampledBootstrap,  // bootstraps on w' Q(S', A') directly
};

/// Forward-view lambda-return targets for every step of a completed episode,
/// evaluated recursively from the tail with the given (frozen) value
/// estimate. Test oracle for the backward view.
Eigen::VectorXd forward_lambda_return(const Trajectory& traj, const ValueFunction& value,
                                      const PolicyTable& mu, const PolicyTable& pi, double lambda,
                                      double gamma, WeightKind kind,
                                      LambdaReturnForm form = LambdaReturnForm::ControlVariate,
                                      double clip_lo = 0.0, double clip_hi = 1.0);

struct McConfig {
  double alpha{0.05};
  double gamma{1.0};
  WeightKind weights{WeightKind::Sparho};
  double clip_lo{0.0}, clip_hi{1.0};
  long episodes{10000};
  long max_steps{1000000};
  long measure_every{0};     // emit an RMS point every this many episodes
  double init_noise{0.01};   // stddev of the initial table noise
};

struct EpisodicRunResult {
  ValueFunction value;
  MetricSeries series;  // "rms" against q_true, when one is supplied
  long truncated_episodes{0};
};

/// First-visit Monte Carlo with per-decision weighting: episodes are sampled
/// under mu, the return is accumulated backwards as G = R + gamma * w * G
/// with w the configured weight of the successor pair under the current
/// values (0 entering the terminal state), and each pair is updated at its
/// first occurrence in the episode.
EpisodicRunResult run_mc_first_visit(const TabularMDP& mdp, const PolicyTable& mu,
                                     const PolicyTable& pi, const McConfig& config, Rng& rng,
                                     const Eigen::MatrixXd* q_true = nullptr);

struct NStepConfig {
  int n{1};
  double alpha{0.1};
  double gamma{1.0};
  WeightKind weights{WeightKind::Sparho};
  double clip_lo{0.0}, clip_hi{1.0};
  long steps{10000};  // total environment transitions
  long max_steps{1000000};
  long measure_every{0};
};

/// Forward-view n-step per-decision targets, applied online with delay n
/// (remaining updates flush when the episode terminates).
EpisodicRunResult run_n_step(const TabularMDP& mdp, const PolicyTable& mu, const PolicyTable& pi,
                             const NStepConfig& config, Rng& rng,
                             const Eigen::MatrixXd* q_true = nullptr);

/// n-step per-decision return targets for every step of a completed episode
/// with frozen values: G_{t:t+n} bootstraps on Q(S_{t+n}, A_{t+n}) and the
/// recursion is cut at the terminal transition.
Eigen::VectorXd nstep_targets(const Trajectory& traj, const ValueFunction& value,
                              const PolicyTable& mu, const PolicyTable& pi, int n, double gamma,
                              WeightKind kind, double clip_lo = 0.0, double clip_hi = 1.0);

}  // namespace sparho
