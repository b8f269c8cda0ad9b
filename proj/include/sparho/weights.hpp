#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparho {

/// Families of per-action importance weights. IS is the plain probability
/// ratio; the others are value-aware weights obtained by minimizing a
/// quadratic objective subject to expectation-matching constraints.
enum class WeightKind {
  IS,
  Sparho,
  ClippedIS,
  ClippedSparho,
  L2ToOne,
  L2ToC,
  MinVarLengthC,
  MinVarProduct,
};

/// Objectives accepted by the KKT oracle.
enum class WeightObjective { Sparho, L2ToOne, L2ToC, MinVarLengthC, MinVarProduct };

inline const char* to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::IS: return "is";
    case WeightKind::Sparho: return "sparho";
    case WeightKind::ClippedIS: return "clipped_is";
    case WeightKind::ClippedSparho: return "clipped_sparho";
    case WeightKind::L2ToOne: return "l2_to_one";
    case WeightKind::L2ToC: return "l2_to_c";
    case WeightKind::MinVarLengthC: return "minvar_length_c";
    case WeightKind::MinVarProduct: return "minvar_product";
  }
  return "unknown";
}

/// Input lies in the degenerate region of a closed form (vanishing
/// denominator, or a near-zero action value for the product objective).
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
struct WeightVectorT {
  Eigen::Vector<Scalar, Eigen::Dynamic> weights;
  WeightKind kind{WeightKind::IS};
};
using WeightVector = WeightVectorT<double>;

/// Closed-form moments of a weight vector under the behavior policy.
template <typename Scalar>
struct WeightStatsT {
  Scalar mean_weight;        // E_mu[w]
  Scalar weight_variance;    // Var_mu(w)
  Scalar estimate_variance;  // Var_mu(w Q)
  Scalar bias;               // E_mu[w Q] - E_pi[Q]
  Scalar bias_sq;
};
using WeightStats = WeightStatsT<double>;

template <typename Scalar>
struct KktSolutionT {
  WeightVectorT<Scalar> weights;
  Eigen::Vector<Scalar, Eigen::Dynamic> multipliers;  // lambda_0 [, lambda_1]
};
using KktSolution = KktSolutionT<double>;

namespace detail {

template <typename DMu, typename DPi>
void check_policy_pair(const Eigen::MatrixBase<DMu>& mu, const Eigen::MatrixBase<DPi>& pi) {
  if (mu.size() != pi.size()) throw std::invalid_argument("mu and pi must have equal length");
  if ((mu.derived().array() <= 0).any())
    throw std::invalid_argument("behavior policy must be soft (all entries > 0)");
}

template <typename Scalar>
Scalar degeneracy_threshold(Scalar second_moment) {
  return Scalar(1e-12) * std::max(Scalar(1), second_moment);
}

/// Shared closed form behind sparho_weights and minvar_length_c_weights:
/// w = c + (Q - E_mu[Q]) (E_pi[Q] - c E_mu[Q]) / Var_mu(Q).
///
/// The deviations are re-centered so their mu-weighted sum vanishes to second
/// order, and the variance is accumulated as sum mu (Q - m) Q, the same inner
/// product a constraint check evaluates. Both choices keep the constraint
/// residuals at rounding level even when Var_mu(Q) is tiny and the weights
/// are large.
template <typename Vec, typename Scalar>
bool centered_minvar(const Vec& mu_v, const Vec& pi_v, const Vec& q_v, Scalar c, Vec& weights) {
  const Scalar mean_q = mu_v.dot(q_v);
  Vec centered = q_v.array() - mean_q;
  centered.array() -= mu_v.dot(centered);
  const Scalar var_q = (mu_v.array() * centered.array() * q_v.array()).sum();
  const Scalar m2 = (mu_v.array() * q_v.array().square()).sum();
  if (!(var_q > degeneracy_threshold(m2))) return false;
  const Scalar scale = (pi_v.dot(q_v) - c * mean_q) / var_q;
  weights = Vec::Constant(q_v.size(), c) + centered * scale;
  return true;
}

}  // namespace detail

/// Ordinary importance sampling ratios pi/mu.
template <typename DMu, typename DPi>
WeightVectorT<typename DMu::Scalar> is_weights(const Eigen::MatrixBase<DMu>& mu,
                                               const Eigen::MatrixBase<DPi>& pi) {
  detail::check_policy_pair(mu, pi);
  using Scalar = typename DMu::Scalar;
  WeightVectorT<Scalar> out;
  out.kind = WeightKind::IS;
  out.weights = (pi.derived().array() / mu.derived().array()).matrix();
  return out;
}

/// Minimum-variance value-aware weights: the unique w with
/// E_mu[w Q] = E_pi[Q] and E_mu[w] = 1 minimizing Var_mu(w).
/// When Var_mu(Q) is below the degeneracy threshold every feasible vector has
/// identical weighted value, so the variance-minimal all-ones vector is
/// returned.
template <typename DMu, typename DPi, typename DQ>
WeightVectorT<typename DMu::Scalar> sparho_weights(const Eigen::MatrixBase<DMu>& mu,
                                                   const Eigen::MatrixBase<DPi>& pi,
                                                   const Eigen::MatrixBase<DQ>& q) {
  detail::check_policy_pair(mu, pi);
  if (q.size() != mu.size()) throw std::invalid_argument("q must match policy length");
  using Scalar = typename DMu::Scalar;
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vec mu_v = mu.derived();
  const Vec q_v = q.derived();

  WeightVectorT<Scalar> out;
  out.kind = WeightKind::Sparho;
  const Vec pi_v = pi.derived();
  if (!detail::centered_minvar(mu_v, pi_v, q_v, Scalar(1), out.weights))
    out.weights = Vec::Ones(q_v.size());
  return out;
}

/// Elementwise clamp to [lo, hi]. IS and Sparho kinds map to their clipped
/// variants; other kinds keep their tag.
template <typename Scalar>
WeightVectorT<Scalar> clip_weights(const WeightVectorT<Scalar>& w, Scalar lo, Scalar hi) {
  if (lo > hi) throw std::invalid_argument("clip_weights: lo > hi");
  WeightVectorT<Scalar> out;
  out.weights = w.weights.array().min(hi).max(lo).matrix();
  switch (w.kind) {
    case WeightKind::IS: out.kind = WeightKind::ClippedIS; break;
    case WeightKind::Sparho: out.kind = WeightKind::ClippedSparho; break;
    default: out.kind = w.kind; break;
  }
  return out;
}

/// Weights of minimum l2 distance to c subject to E_mu[w Q] = E_pi[Q] only.
template <typename DMu, typename DPi, typename DQ>
WeightVectorT<typename DMu::Scalar> l2_to_c_weights(const Eigen::MatrixBase<DMu>& mu,
                                                    const Eigen::MatrixBase<DPi>& pi,
                                                    const Eigen::MatrixBase<DQ>& q,
                                                    typename DMu::Scalar c) {
  detail::check_policy_pair(mu, pi);
  if (q.size() != mu.size()) throw std::invalid_argument("q must match policy length");
  using Scalar = typename DMu::Scalar;
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vec mu_v = mu.derived();
  const Vec q_v = q.derived();

  const Scalar m2 = (mu_v.array() * q_v.array().square()).sum();
  if (m2 < detail::degeneracy_threshold(m2))
    throw DegenerateInputError("l2 weights: E_mu[Q^2] below degeneracy threshold");
  const Scalar scale = (pi.derived().dot(q_v) - c * mu_v.dot(q_v)) / m2;
  WeightVectorT<Scalar> out;
  out.kind = WeightKind::L2ToC;
  out.weights = Vec::Constant(q_v.size(), c) + q_v * scale;
  return out;
}

/// l2_to_c_weights at c = 1.
template <typename DMu, typename DPi, typename DQ>
WeightVectorT<typename DMu::Scalar> l2_to_one_weights(const Eigen::MatrixBase<DMu>& mu,
                                                      const Eigen::MatrixBase<DPi>& pi,
                                                      const Eigen::MatrixBase<DQ>& q) {
  using Scalar = typename DMu::Scalar;
  auto out = l2_to_c_weights(mu, pi, q, Scalar(1));
  out.kind = WeightKind::L2ToOne;
  return out;
}

/// Minimum Var_mu(w) around expected length c: E_mu[w Q] = E_pi[Q] and
/// E_mu[w] = c. Reduces to sparho_weights at c = 1.
template <typename DMu, typename DPi, typename DQ>
WeightVectorT<typename DMu::Scalar> minvar_length_c_weights(const Eigen::MatrixBase<DMu>& mu,
                                                            const Eigen::MatrixBase<DPi>& pi,
                                                            const Eigen::MatrixBase<DQ>& q,
                                                            typename DMu::Scalar c) {
  detail::check_policy_pair(mu, pi);
  if (q.size() != mu.size()) throw std::invalid_argument("q must match policy length");
  using Scalar = typename DMu::Scalar;
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vec mu_v = mu.derived();
  const Vec pi_v = pi.derived();
  const Vec q_v = q.derived();

  WeightVectorT<Scalar> out;
  out.kind = WeightKind::MinVarLengthC;
  if (!detail::centered_minvar(mu_v, pi_v, q_v, c, out.weights))
    throw DegenerateInputError("minvar_length_c: Var_mu(Q) below degeneracy threshold");
  return out;
}

/// Weights minimizing Var_mu(w Q) subject to E_mu[w Q] = E_pi[Q] and
/// E_mu[w] = 1. The closed form divides by each Q_a, so near-zero action
/// values and constant Q are rejected as degenerate.
template <typename DMu, typename DPi, typename DQ>
WeightVectorT<typename DMu::Scalar> minvar_product_weights(const Eigen::MatrixBase<DMu>& mu,
                                                           const Eigen::MatrixBase<DPi>& pi,
                                                           const Eigen::MatrixBase<DQ>& q) {
  detail::check_policy_pair(mu, pi);
  if (q.size() != mu.size()) throw std::invalid_argument("q must match policy length");
  using Scalar = typename DMu::Scalar;
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vec mu_v = mu.derived();
  const Vec pi_v = pi.derived();
  const Vec q_v = q.derived();

  const Scalar max_abs = q_v.cwiseAbs().maxCoeff();
  if (max_abs <= 0 || (q_v.cwiseAbs().array() < Scalar(1e-9) * max_abs).any())
    throw DegenerateInputError("minvar_product: near-zero action value");

  // The 1/Q and 1/Q^2 terms cancel catastrophically for small action values,
  // so the closed form is evaluated in extended precision and rounded once.
  // The policies are renormalized first: the derivation substitutes
  // sum(mu) = 1 exactly, and a one-ulp normalization defect is amplified by
  // the near-singular multiplier system into visible constraint residuals.
  using Long = long double;
  const Eigen::Index n = q_v.size();
  Eigen::Vector<Long, Eigen::Dynamic> u(n), mu_l(n);
  Long v = 0;
  Long mu_sum = 0, pi_sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mu_sum += static_cast<Long>(mu_v[i]);
    pi_sum += static_cast<Long>(pi_v[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    u[i] = Long(1) / static_cast<Long>(q_v[i]);
    mu_l[i] = static_cast<Long>(mu_v[i]) / mu_sum;
    v += (static_cast<Long>(pi_v[i]) / pi_sum) * static_cast<Long>(q_v[i]);
  }
  const Long mean_u = mu_l.dot(u);
  Eigen::Vector<Long, Eigen::Dynamic> centered = u.array() - mean_u;
  centered.array() -= mu_l.dot(centered);
  const Long denom = (mu_l.array() * centered.array() * u.array()).sum();
  const Scalar m2 = (mu_v.array() * q_v.array().square()).sum();
  if (!(static_cast<Scalar>(denom) > detail::degeneracy_threshold(m2)))
    throw DegenerateInputError("minvar_product: degenerate denominator");

  const Long l1 = (Long(1) - v * mean_u) / denom;
  const Long l0 = -mean_u * l1;
  WeightVectorT<Scalar> out;
  out.kind = WeightKind::MinVarProduct;
  out.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.weights[i] = static_cast<Scalar>(v * u[i] + l0 * u[i] + l1 * u[i] * u[i]);
  return out;
}

/// Closed-form moments of w under mu: E_mu[w], Var_mu(w), Var_mu(wQ), and the
/// bias E_mu[wQ] - E_pi[Q].
template <typename DMu, typename DPi, typename DQ, typename Scalar>
WeightStatsT<Scalar> weight_stats(const Eigen::MatrixBase<DMu>& mu,
                                  const Eigen::MatrixBase<DPi>& pi,
                                  const Eigen::MatrixBase<DQ>& q,
                                  const WeightVectorT<Scalar>& w) {
  if (mu.size() != pi.size() || mu.size() != q.size() || mu.size() != w.weights.size())
    throw std::invalid_argument("weight_stats: length mismatch");
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vec mu_v = mu.derived();
  const Vec q_v = q.derived();

  WeightStatsT<Scalar> stats;
  stats.mean_weight = mu_v.dot(w.weights);
  stats.weight_variance = (mu_v.array() * (w.weights.array() - stats.mean_weight).square()).sum();
  const Vec wq = w.weights.cwiseProduct(q_v);
  const Scalar mean_wq = mu_v.dot(wq);
  stats.estimate_variance = (mu_v.array() * (wq.array() - mean_wq).square()).sum();
  stats.bias = mean_wq - pi.derived().dot(q_v);
  stats.bias_sq = stats.bias * stats.bias;
  return stats;
}

/// Value of the Lagrangian for `objective` at (w, multipliers). Used for
/// finite-difference stationarity checks of the oracle and closed forms.
inline double kkt_lagrangian(WeightObjective objective,
                             const Eigen::Ref<const Eigen::VectorXd>& mu,
                             const Eigen::Ref<const Eigen::VectorXd>& pi,
                             const Eigen::Ref<const Eigen::VectorXd>& q, double c,
                             const Eigen::Ref<const Eigen::VectorXd>& w,
                             const Eigen::Ref<const Eigen::VectorXd>& multipliers) {
  const double pi_q = pi.dot(q);
  const double mu_wq = mu.dot(w.cwiseProduct(q));
  const double mu_w = mu.dot(w);
  switch (objective) {
    case WeightObjective::Sparho:
      return (mu.array() * (w.array() - 1.0).square()).sum() +
             multipliers[0] * (pi_q - mu_wq) + multipliers[1] * (1.0 - mu_w);
    case WeightObjective::L2ToOne:
      return (mu.array() * (w.array() - 1.0).square()).sum() + multipliers[0] * (pi_q - mu_wq);
    case WeightObjective::L2ToC:
      return (mu.array() * (w.array() - c).square()).sum() + multipliers[0] * (pi_q - mu_wq);
    case WeightObjective::MinVarLengthC:
      return (mu.array() * (w.array() - c).square()).sum() +
             multipliers[0] * (pi_q - mu_wq) + multipliers[1] * (c - mu_w);
    case WeightObjective::MinVarProduct: {
      const double v = pi_q;
      return (mu.array() * (w.array() * q.array() - v).square()).sum() +
             multipliers[0] * (v - mu_wq) + multipliers[1] * (1.0 - mu_w);
    }
  }
  throw std::invalid_argument("kkt_lagrangian: unknown objective");
}

/// Solves the stationarity + constraint system of `objective` directly as one
/// dense linear system. Deliberately shares no code with the closed forms
/// above; it is the independent check for them.
inline KktSolution kkt_oracle(const Eigen::Ref<const Eigen::VectorXd>& mu,
                              const Eigen::Ref<const Eigen::VectorXd>& pi,
                              const Eigen::Ref<const Eigen::VectorXd>& q,
                              WeightObjective objective, double c = 1.0) {
  if (mu.size() != pi.size() || mu.size() != q.size())
    throw std::invalid_argument("kkt_oracle: length mismatch");
  if ((mu.array() <= 0).any())
    throw std::invalid_argument("kkt_oracle: behavior policy must be soft");

  const Eigen::Index n = mu.size();
  const bool two_constraints = objective == WeightObjective::Sparho ||
                               objective == WeightObjective::MinVarLengthC ||
                               objective == WeightObjective::MinVarProduct;
  const Eigen::Index m = two_constraints ? 2 : 1;

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);

  const double v = pi.dot(q);
  for (Eigen::Index i = 0; i < n; ++i) {
    // d/dw_i of the objective is linear in w_i: hess_i * w_i - lin_i.
    double hess = 2.0 * mu[i];
    double lin = 2.0 * mu[i];
    switch (objective) {
      case WeightObjective::Sparho:
      case WeightObjective::L2ToOne:
        break;
      case WeightObjective::L2ToC:
      case WeightObjective::MinVarLengthC:
        lin = 2.0 * c * mu[i];
        break;
      case WeightObjective::MinVarProduct:
        hess = 2.0 * mu[i] * q[i] * q[i];
        lin = 2.0 * mu[i] * q[i] * v;
        break;
    }
    kkt(i, i) = hess;
    kkt(i, n) = -mu[i] * q[i];  // value-matching constraint gradient
    kkt(n, i) = mu[i] * q[i];
    if (two_constraints) {
      kkt(i, n + 1) = -mu[i];  // mean-weight constraint gradient
      kkt(n + 1, i) = mu[i];
    }
    rhs[i] = lin;
  }
  rhs[n] = v;
  if (two_constraints)
    rhs[n + 1] = objective == WeightObjective::MinVarLengthC ? c : 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible())
    throw DegenerateInputError("kkt_oracle: singular KKT system");
  const Eigen::VectorXd sol = lu.solve(rhs);

  KktSolution out;
  out.weights.weights = sol.head(n);
  out.multipliers = sol.tail(m);
  switch (objective) {
    case WeightObjective::Sparho: out.weights.kind = WeightKind::Sparho; break;
    case WeightObjective::L2ToOne: out.weights.kind = WeightKind::L2ToOne; break;
    case WeightObjective::L2ToC: out.weights.kind = WeightKind::L2ToC; break;
    case WeightObjective::MinVarLengthC: out.weights.kind = WeightKind::MinVarLengthC; break;
    case WeightObjective::MinVarProduct: out.weights.kind = WeightKind::MinVarProduct; break;
  }
  return out;
}

/// Dispatch on kind. Clipped kinds clamp to [clip_lo, clip_hi].
inline WeightVector weights_for(WeightKind kind, const Eigen::Ref<const Eigen::VectorXd>& mu,
                                const Eigen::Ref<const Eigen::VectorXd>& pi,
                                const Eigen::Ref<const Eigen::VectorXd>& q, double c = 1.0,
                                double clip_lo = 0.0, double clip_hi = 1.0) {
  switch (kind) {
    case WeightKind::IS: return is_weights(mu, pi);
    case WeightKind::Sparho: return sparho_weights(mu, pi, q);
    case WeightKind::ClippedIS: return clip_weights(is_weights(mu, pi), clip_lo, clip_hi);
    case WeightKind::ClippedSparho:
      return clip_weights(sparho_weights(mu, pi, q), clip_lo, clip_hi);
    case WeightKind::L2ToOne: return l2_to_one_weights(mu, pi, q);
    case WeightKind::L2ToC: return l2_to_c_weights(mu, pi, q, c);
    case WeightKind::MinVarLengthC: return minvar_length_c_weights(mu, pi, q, c);
    case WeightKind::MinVarProduct: return minvar_product_weights(mu, pi, q);
  }
  throw std::invalid_argument("weights_for: unknown kind");
}

}  // namespace sparho
