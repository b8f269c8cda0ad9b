#include "sparho/learners.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace sparho {

const char* to_string(LearnerVariant v) {
  switch (v) {
    case LearnerVariant::QLambda: return "q_lambda";
    case LearnerVariant::SparhoLambda: return "sparho_lambda";
    case LearnerVariant::RetraceLambda: return "retrace_lambda";
    case LearnerVariant::ReSparhoLambda: return "resparho_lambda";
    case LearnerVariant::EmphaticQ: return "emphatic_q";
    case LearnerVariant::MC: return "mc";
    case LearnerVariant::NStep: return "n_step";
  }
  return "unknown";
}

WeightKind lambda_weight_kind(LearnerVariant v) {
  switch (v) {
    case LearnerVariant::QLambda: return WeightKind::IS;
    case LearnerVariant::SparhoLambda: return WeightKind::Sparho;
    case LearnerVariant::RetraceLambda: return WeightKind::ClippedIS;
    case LearnerVariant::ReSparhoLambda: return WeightKind::ClippedSparho;
    default: break;
  }
  throw std::invalid_argument("lambda_weight_kind: not a lambda variant");
}

namespace {

bool is_clipped_kind(WeightKind k) {
  return k == WeightKind::ClippedIS || k == WeightKind::ClippedSparho;
}

}  // namespace

void LearnerConfig::validate() const {
  if (alpha <= 0.0) throw std::invalid_argument("LearnerConfig: alpha must be positive");
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("LearnerConfig: lambda outside [0, 1]");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("LearnerConfig: gamma outside [0, 1]");
  if (clip && clip->first > clip->second)
    throw std::invalid_argument("LearnerConfig: clip lo > hi");
  switch (variant) {
    case LearnerVariant::QLambda:
    case LearnerVariant::SparhoLambda:
      if (clip) throw std::invalid_argument("LearnerConfig: clip set on an unclipped variant");
      break;
    case LearnerVariant::RetraceLambda:
    case LearnerVariant::ReSparhoLambda:
      if (!clip) throw std::invalid_argument("LearnerConfig: clipped variant requires clip range");
      break;
    case LearnerVariant::EmphaticQ:
    case LearnerVariant::MC:
    case LearnerVariant::NStep:
      if (is_clipped_kind(weights) != clip.has_value())
        throw std::invalid_argument("LearnerConfig: clip must be present iff weights are clipped");
      break;
  }
  if (variant == LearnerVariant::NStep && nstep < 1)
    throw std::invalid_argument("LearnerConfig: nstep must be >= 1");
}

double td_error_expected_sarsa(const ValueFunction& q, const PolicyTable& pi, const Step& step,
                               double gamma) {
  const double bootstrap =
      q.is_terminal(step.next_state) ? 0.0 : pi.row(step.next_state).dot(q.action_values(step.next_state));
  return step.reward + gamma * bootstrap - q.q(step.state, step.action);
}

double step_weight(WeightKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& mu_row,
                   const Eigen::Ref<const Eigen::RowVectorXd>& pi_row,
                   const Eigen::Ref<const Eigen::VectorXd>& q_row, int action, double clip_lo,
                   double clip_hi) {
  switch (kind) {
    case WeightKind::IS:
      return pi_row[action] / mu_row[action];
    case WeightKind::ClippedIS:
      return std::clamp(pi_row[action] / mu_row[action], clip_lo, clip_hi);
    case WeightKind::Sparho:
      return sparho_weights(mu_row.transpose(), pi_row.transpose(), q_row).weights[action];
    case WeightKind::ClippedSparho:
      return std::clamp(sparho_weights(mu_row.transpose(), pi_row.transpose(), q_row).weights[action],
                        clip_lo, clip_hi);
    default:
      return weights_for(kind, mu_row.transpose(), pi_row.transpose(), q_row, 1.0, clip_lo, clip_hi)
          .weights[action];
  }
}

TdLambdaLearner::TdLambdaLearner(ValueFunction value, LearnerConfig config, PolicyTable mu,
                                 PolicyTable pi)
    : value_(std::move(value)),
      config_(config),
      kind_(lambda_weight_kind(config.variant)),
      mu_(std::move(mu)),
      pi_(std::move(pi)),
      trace_(value_.params().size()) {
  config_.validate();
  if (config_.clip) {
    clip_lo_ = config_.clip->first;
    clip_hi_ = config_.clip->second;
  }
}

void TdLambdaLearner::begin_episode() { trace_.reset(); }

double TdLambdaLearner::pair_weight(int s, int a) const {
  return step_weight(kind_, mu_.row(s), pi_.row(s), value_.action_values(s), a, clip_lo_, clip_hi_);
}

void TdLambdaLearner::step(const Step& tr) {
  if (diverged_) return;
  ++step_count_;

  const double w = pair_weight(tr.state, tr.action);
  const double delta = td_error_expected_sarsa(value_, pi_, tr, config_.gamma);
  if (!std::isfinite(w) || !std::isfinite(delta)) {
    diverged_ = true;
    diverged_step_ = step_count_;
    return;
  }

  trace_.decay(config_.gamma * config_.lambda * w);
  value_.gradient(tr.state, tr.action, grad_);
  for (const auto& [idx, g] : grad_) trace_.add(idx, g);

  double* target = sink_ ? sink_->data() : value_.params().data();
  const double scale = config_.alpha * delta;
  for (const Eigen::Index idx : trace_.active()) target[idx] += scale * trace_.value(idx);

  if (!grad_.empty() && !std::isfinite(target[grad_.front().first])) {
    diverged_ = true;
    diverged_step_ = step_count_;
  }
}

EmphaticLearner::EmphaticLearner(ValueFunction value, LearnerConfig config, PolicyTable mu,
                                 PolicyTable pi, Eigen::VectorXd interest)
    : value_(std::move(value)),
      config_(config),
      mu_(std::move(mu)),
      pi_(std::move(pi)),
      interest_(std::move(interest)),
      trace_(value_.params().size()) {
  if (config_.variant != LearnerVariant::EmphaticQ)
    throw std::invalid_argument("EmphaticLearner: variant must be EmphaticQ");
  config_.validate();
  if (config_.clip) {
    clip_lo_ = config_.clip->first;
    clip_hi_ = config_.clip->second;
  }
}

void EmphaticLearner::begin_episode() {
  trace_.reset();
  followon_ = 0.0;
  emphasis_ = 0.0;
  prev_weight_ = 0.0;
}

void EmphaticLearner::step(const Step& tr) {
  if (diverged_) return;
  ++step_count_;

  followon_ = config_.gamma * prev_weight_ * followon_ + interest_of(tr.state);
  emphasis_ = config_.lambda * interest_of(tr.state) + (1.0 - config_.lambda) * followon_;

  const double w = step_weight(config_.weights, mu_.row(tr.state), pi_.row(tr.state),
                               value_.action_values(tr.state), tr.action, clip_lo_, clip_hi_);
  const double delta = td_error_expected_sarsa(value_, pi_, tr, config_.gamma);
  if (!std::isfinite(w) || !std::isfinite(delta) || !std::isfinite(followon_)) {
    diverged_ = true;
    diverged_step_ = step_count_;
    return;
  }

  trace_.decay(config_.gamma * config_.lambda * w);
  value_.gradient(tr.state, tr.action, grad_);
  for (const auto& [idx, g] : grad_) trace_.add(idx, emphasis_ * g);

  double* target = value_.params().data();
  const double scale = config_.alpha * delta;
  for (const Eigen::Index idx : trace_.active()) target[idx] += scale * trace_.value(idx);

  prev_weight_ = w;
  if (!grad_.empty() && !std::isfinite(target[grad_.front().first])) {
    diverged_ = true;
    diverged_step_ = step_count_;
  }
}

Eigen::VectorXd forward_lambda_return(const Trajectory& traj, const ValueFunction& value,
                                      const PolicyTable& mu, const PolicyTable& pi, double lambda,
                                      double gamma, WeightKind kind, LambdaReturnForm form,
                                      double clip_lo, double clip_hi) {
  if (traj.truncated)
    throw std::invalid_argument("forward_lambda_return: requires a completed episode");
  const long T = static_cast<long>(traj.steps.size());
  Eigen::VectorXd targets(T);
  double next_target = 0.0;
  for (long t = T - 1; t >= 0; --t) {
    const Step& st = traj.steps[static_cast<std::size_t>(t)];
    if (value.is_terminal(st.next_state)) {
      targets[t] = st.reward;
    } else {
      const int a_next = traj.steps[static_cast<std::size_t>(t + 1)].action;
      const Eigen::VectorXd q_next = value.action_values(st.next_state);
      const double e_pi = pi.row(st.next_state).dot(q_next);
      const double w =
          step_weight(kind, mu.row(st.next_state), pi.row(st.next_state), q_next, a_next, clip_lo, clip_hi);
      if (form == LambdaReturnForm::ControlVariate) {
        targets[t] = st.reward + gamma * (lambda * (w * next_target + e_pi - w * q_next[a_next]) +
                                          (1.0 - lambda) * e_pi);
      } else {
        targets[t] = st.reward + gamma * w * (lambda * next_target + (1.0 - lambda) * q_next[a_next]);
      }
    }
    next_target = targets[t];
  }
  return targets;
}

namespace {

double rms_vs(const ValueFunction& value, const Eigen::MatrixXd& q_true) {
  double sum = 0.0;
  long count = 0;
  for (int s = 0; s < value.n_states(); ++s) {
    if (value.is_terminal(s)) continue;
    for (int a = 0; a < value.n_actions(); ++a) {
      const double d = value.q(s, a) - q_true(s, a);
      sum += d * d;
      ++count;
    }
  }
  return std::sqrt(sum / static_cast<double>(count));
}

}  // namespace

EpisodicRunResult run_mc_first_visit(const TabularMDP& mdp, const PolicyTable& mu,
                                     const PolicyTable& pi, const McConfig& config, Rng& rng,
                                     const Eigen::MatrixXd* q_true) {
  if (mdp.n_terminal() == 0)
    throw std::invalid_argument("run_mc_first_visit: requires an episodic MDP");
  EpisodicRunResult result{ValueFunction::tabular(mdp.n_states, mdp.n_actions, mdp.terminal), {}, 0};
  ValueFunction& value = result.value;
  if (config.init_noise > 0.0) value.randomize(rng, config.init_noise);

  std::unordered_map<long, long> first_index;
  for (long episode = 1; episode <= config.episodes; ++episode) {
    const Trajectory traj = sample_episode(mdp, mu, rng, config.max_steps);
    if (traj.truncated) {
      ++result.truncated_episodes;
      continue;
    }
    const long T = static_cast<long>(traj.steps.size());
    first_index.clear();
    for (long t = 0; t < T; ++t) {
      const Step& st = traj.steps[static_cast<std::size_t>(t)];
      const long key = static_cast<long>(st.state) * mdp.n_actions + st.action;
      first_index.emplace(key, t);  // keeps the earliest occurrence
    }

    double g = 0.0;
    for (long t = T - 1; t >= 0; --t) {
      const Step& st = traj.steps[static_cast<std::size_t>(t)];
      if (value.is_terminal(st.next_state)) {
        g = st.reward;
      } else {
        const int a_next = traj.steps[static_cast<std::size_t>(t + 1)].action;
        const double w = step_weight(config.weights, mu.row(st.next_state), pi.row(st.next_state),
                                     value.action_values(st.next_state), a_next, config.clip_lo,
                                     config.clip_hi);
        g = st.reward + config.gamma * w * g;
      }
      const long key = static_cast<long>(st.state) * mdp.n_actions + st.action;
      if (first_index.at(key) == t) {
        const double old = value.params()(st.state, st.action);
        value.params()(st.state, st.action) = old + config.alpha * (g - old);
      }
    }

    if (q_true && config.measure_every > 0 && episode % config.measure_every == 0)
      result.series.append(episode, "rms", rms_vs(value, *q_true));
  }
  return result;
}

Eigen::VectorXd nstep_targets(const Trajectory& traj, const ValueFunction& value,
                              const PolicyTable& mu, const PolicyTable& pi, int n, double gamma,
                              WeightKind kind, double clip_lo, double clip_hi) {
  if (traj.truncated) throw std::invalid_argument("nstep_targets: requires a completed episode");
  const long T = static_cast<long>(traj.steps.size());
  Eigen::VectorXd targets(T);
  for (long tau = 0; tau < T; ++tau) {
    const long horizon = std::min<long>(tau + n, T);
    double g;
    if (horizon == T) {
      g = 0.0;  // the recursion is cut at the terminal transition below
    } else {
      const Step& h = traj.steps[static_cast<std::size_t>(horizon)];
      g = value.q(h.state, h.action);
    }
    for (long k = horizon - 1; k >= tau; --k) {
      const Step& st = traj.steps[static_cast<std::size_t>(k)];
      if (value.is_terminal(st.next_state)) {
        g = st.reward;
      } else {
        const int a_next = traj.steps[static_cast<std::size_t>(k + 1)].action;
        const double w = step_weight(kind, mu.row(st.next_state), pi.row(st.next_state),
                                     value.action_values(st.next_state), a_next, clip_lo, clip_hi);
        g = st.reward + gamma * w * g;
      }
    }
    targets[tau] = g;
  }
  return targets;
}

EpisodicRunResult run_n_step(const TabularMDP& mdp, const PolicyTable& mu, const PolicyTable& pi,
                             const NStepConfig& config, Rng& rng, const Eigen::MatrixXd* q_true) {
  if (config.n < 1) throw std::invalid_argument("run_n_step: n must be >= 1");
  EpisodicRunResult result{ValueFunction::tabular(mdp.n_states, mdp.n_actions, mdp.terminal), {}, 0};
  ValueFunction& value = result.value;

  // Applies the n-step target for time tau of the current episode, computed
  // backwards from min(tau + n, T) with the values as of now.
  auto apply_update = [&](const Trajectory& traj, long tau) {
    const long T = static_cast<long>(traj.steps.size());
    const long horizon = std::min<long>(tau + config.n, T);
    double g;
    if (horizon == T) {
      g = 0.0;
    } else {
      const Step& h = traj.steps[static_cast<std::size_t>(horizon)];
      g = value.q(h.state, h.action);
    }
    for (long k = horizon - 1; k >= tau; --k) {
      const Step& st = traj.steps[static_cast<std::size_t>(k)];
      if (value.is_terminal(st.next_state)) {
        g = st.reward;
      } else {
        const int a_next = traj.steps[static_cast<std::size_t>(k + 1)].action;
        const double w = step_weight(config.weights, mu.row(st.next_state), pi.row(st.next_state),
                                     value.action_values(st.next_state), a_next, config.clip_lo,
                                     config.clip_hi);
        g = st.reward + config.gamma * w * g;
      }
    }
    const Step& target = traj.steps[static_cast<std::size_t>(tau)];
    const double old = value.params()(target.state, target.action);
    value.params()(target.state, target.action) = old + config.alpha * (g - old);
  };

  long total_steps = 0;
  while (total_steps < config.steps) {
    const Trajectory traj = sample_episode(mdp, mu, rng, config.max_steps);
    if (traj.truncated) {
      ++result.truncated_episodes;
      continue;
    }
    const long T = static_cast<long>(traj.steps.size());
    for (long arrived = 1; arrived <= T; ++arrived) {
      if (arrived - config.n >= 0 && arrived < T) apply_update(traj, arrived - config.n);
      ++total_steps;
      if (q_true && config.measure_every > 0 && total_steps % config.measure_every == 0)
        result.series.append(total_steps, "rms", rms_vs(value, *q_true));
      if (total_steps >= config.steps) break;
    }
    // Flush the targets that were still waiting on the horizon.
    for (long tau = std::max<long>(0, T - config.n); tau < T; ++tau) {
      if (tau + config.n < T) continue;  // already applied online
      apply_update(traj, tau);
    }
  }
  return result;
}

}  // namespace sparho
