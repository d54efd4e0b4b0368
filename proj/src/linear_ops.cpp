#include "scq/linear/ops.hpp"

#include <cmath>

#include <Eigen/LU>

namespace scq::linear {

namespace {

Vector state_values(const LinearMdpSpec& spec, const PolicyMatrix& policy, const Vector& q) {
  Vector v(spec.n_states);
  for (Index s = 0; s < spec.n_states; ++s) {
    Real acc = 0.0;
    for (Index a = 0; a < spec.n_actions; ++a)
      acc += policy.probs(s, a) * q[spec.pair_index(s, a)];
    v[s] = acc;
  }
  return v;
}

// Solves (Phi^T D Phi + ridge I) x = Phi^T D rhs for any pair-indexed rhs.
Vector normal_solve(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                    const Vector& rhs, Real ridge) {
  if (ridge < 0.0) throw std::invalid_argument("ridge must be nonnegative");
  const Matrix weighted = dist.weights.asDiagonal() * spec.features;  // D Phi
  Matrix normal = spec.features.transpose() * weighted;
  normal.diagonal().array() += ridge;
  Eigen::FullPivLU<Matrix> lu(normal);
  if (!lu.isInvertible()) {
    if (ridge == 0.0)
      throw std::invalid_argument(
          "normal matrix Phi^T D Phi is singular; pass ridge > 0 to regularize");
    throw std::invalid_argument("normal matrix is singular even with ridge > 0");
  }
  return lu.solve(weighted.transpose() * rhs);
}

}  // namespace

Vector bellman_backup(const LinearMdpSpec& spec, const PolicyMatrix& policy, const Vector& q) {
  const Matrix p = transition_matrix(spec);
  return reward_vector(spec) + spec.discount * (p * state_values(spec, policy, q));
}

Vector true_q(const LinearMdpSpec& spec, const PolicyMatrix& policy) {
  validate(spec, policy);
  const Index n = spec.n_pairs();
  const Matrix p = transition_matrix(spec);

  // K(sa, s'a') = P(s'|s,a) * policy(a'|s'), so the fixed point solves
  // (I - discount K) q = r.
  Matrix selector = Matrix::Zero(spec.n_states, n);
  for (Index s = 0; s < spec.n_states; ++s)
    for (Index a = 0; a < spec.n_actions; ++a)
      selector(s, spec.pair_index(s, a)) = policy.probs(s, a);
  Matrix system = Matrix::Identity(n, n) - spec.discount * (p * selector);

  Eigen::PartialPivLU<Matrix> lu(system);
  if (lu.rcond() < 1e-12) throw std::runtime_error("ill-conditioned Bellman solve");
  const Vector r = reward_vector(spec);
  Vector q = lu.solve(r);
  Vector residual = q - bellman_backup(spec, policy, q);
  if (residual.lpNorm<Eigen::Infinity>() > 1e-10) {
    q += lu.solve(-residual);
    residual = q - bellman_backup(spec, policy, q);
    if (residual.lpNorm<Eigen::Infinity>() > 1e-10)
      throw std::runtime_error("ill-conditioned Bellman solve");
  }
  return q;
}

QWeights lstdq_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                      const PolicyMatrix& policy, const Vector& q_prev, Real ridge) {
  return QWeights{normal_solve(spec, dist, bellman_backup(spec, policy, q_prev), ridge)};
}

Vector projection_apply(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                        const Vector& v, Real ridge) {
  return spec.features * normal_solve(spec, dist, v, ridge);
}

Matrix ood_policy(const PolicyMatrix& policy, const OodMask& mask) {
  if (policy.probs.rows() != mask.mask.rows() || policy.probs.cols() != mask.mask.cols())
    throw std::invalid_argument("policy and mask shapes disagree");
  return (policy.probs.array() * mask.mask.cast<Real>()).matrix();
}

Vector ratio_vector(const Matrix& numerator, const DatasetDistribution& dist,
                    int* n_unsupported) {
  const Index n_states = numerator.rows();
  const Index n_actions = numerator.cols();
  Vector ratio(n_states * n_actions);
  for (Index s = 0; s < n_states; ++s) {
    for (Index a = 0; a < n_actions; ++a) {
      const Index pair = s * n_actions + a;
      const Real beta = dist.behavior_policy(s, a);
      if (beta > 0.0) {
        ratio[pair] = numerator(s, a) / beta;
      } else {
        if (numerator(s, a) != 0.0 && dist.weights[pair] > 0.0)
          throw std::domain_error("OOD penalty requires behavior support");
        ratio[pair] = 0.0;
        if (n_unsupported != nullptr && numerator(s, a) != 0.0) ++*n_unsupported;
      }
    }
  }
  return ratio;
}

QWeights scq_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                    const PolicyMatrix& policy, const OodMask& mask, const Vector& q_prev,
                    Real alpha, Real ridge) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  const Vector penalty = ratio_vector(ood_policy(policy, mask), dist);
  QWeights out = lstdq_update(spec, dist, policy, q_prev, ridge);
  out.w -= alpha * normal_solve(spec, dist, penalty, ridge);
  return out;
}

QWeights cql_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                    const PolicyMatrix& policy, const Vector& q_prev, Real alpha, Real ridge) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  const Vector penalty = ratio_vector(policy.probs - dist.behavior_policy, dist);
  QWeights out = lstdq_update(spec, dist, policy, q_prev, ridge);
  out.w -= alpha * normal_solve(spec, dist, penalty, ridge);
  return out;
}

FTerms compute_f_terms(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                       const PolicyMatrix& policy, const OodMask& mask, Real ridge) {
  const Matrix pi_ood = ood_policy(policy, mask);
  const Matrix pi_idd = policy.probs - pi_ood;

  const Vector g_full = projection_apply(spec, dist, ratio_vector(policy.probs - dist.behavior_policy, dist), ridge);
  const Vector g_ood = projection_apply(spec, dist, ratio_vector(pi_ood, dist), ridge);
  const Vector g_idd = projection_apply(spec, dist, ratio_vector(pi_idd - dist.behavior_policy, dist), ridge);

  FTerms terms;
  terms.f = state_values(spec, policy, g_full);
  terms.f_ood = state_values(spec, policy, g_ood);
  terms.f_idd = state_values(spec, policy, g_idd);
  return terms;
}

Real alpha_min_pointwise(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                         const PolicyMatrix& policy, const OodMask& mask, const Vector& q_prev,
                         Real ridge) {
  const Vector q_lstd = spec.features * lstdq_update(spec, dist, policy, q_prev, ridge).w;
  const Vector q_true_v = true_q(spec, policy);
  const Vector direction =
      projection_apply(spec, dist, ratio_vector(ood_policy(policy, mask), dist), ridge);

  Real alpha = 0.0;
  for (Index s = 0; s < spec.n_states; ++s) {
    for (Index a = 0; a < spec.n_actions; ++a) {
      if (!mask.mask(s, a)) continue;
      const Index pair = spec.pair_index(s, a);
      if (direction[pair] <= 0.0)
        throw PreconditionViolation("penalty direction vanishes at OOD pair");
      alpha = std::max(alpha, (q_lstd[pair] - q_true_v[pair]) / direction[pair]);
    }
  }
  return std::max(alpha, 0.0);
}

}  // namespace scq::linear
