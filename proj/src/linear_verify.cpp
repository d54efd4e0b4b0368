#include "scq/linear/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scq::linear {

namespace {

constexpr Real kSlack = 1e-8;

Vector policy_value(const LinearMdpSpec& spec, const PolicyMatrix& policy, const Vector& q) {
  Vector v(spec.n_states);
  for (Index s = 0; s < spec.n_states; ++s) {
    Real acc = 0.0;
    for (Index a = 0; a < spec.n_actions; ++a)
      acc += policy.probs(s, a) * q[spec.pair_index(s, a)];
    v[s] = acc;
  }
  return v;
}

}  // namespace

VerificationReport verify_theorem1(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                                   const std::vector<PolicyMatrix>& policy_sequence,
                                   const OodMask& mask, int k_iters, Real ridge) {
  if (k_iters < 1) throw std::invalid_argument("k_iters must be at least 1");
  if (policy_sequence.empty()) throw std::invalid_argument("policy_sequence must be nonempty");
  validate(spec);
  validate(spec, dist);
  validate(spec, mask);
  for (const auto& policy : policy_sequence) validate(spec, policy);

  // The iterate chain starts at the first policy's exact fixed point, so the
  // measured epsilon captures pure feature-interpolation error rather than
  // distance-to-convergence.
  Vector q_hat = true_q(spec, policy_sequence.front());
  Real alpha = 0.0;
  Real epsilon = 0.0;
  Vector q_true_final;

  for (int iter = 0; iter < k_iters; ++iter) {
    const auto& policy =
        policy_sequence[std::min<std::size_t>(iter, policy_sequence.size() - 1)];
    const Vector direction =
        projection_apply(spec, dist, ratio_vector(ood_policy(policy, mask), dist), ridge);
    Real worst_negative = 0.0;
    for (Index s = 0; s < spec.n_states; ++s)
      for (Index a = 0; a < spec.n_actions; ++a)
        if (!mask.mask(s, a))
          worst_negative = std::min(worst_negative, direction[spec.pair_index(s, a)]);
    if (worst_negative < -1e-12)
      throw PreconditionViolation("penalty direction negative at in-distribution pair");

    alpha = alpha_min_pointwise(spec, dist, policy, mask, q_hat, ridge);
    // Roundoff-scale negatives are tolerated above, but only while the
    // pessimism they leak (alpha times the negative direction) stays far
    // below the pass slack.
    if (alpha * -worst_negative > 1e-10)
      throw PreconditionViolation("penalty direction negative at in-distribution pair");
    const Vector q_lstd = spec.features * lstdq_update(spec, dist, policy, q_hat, ridge).w;
    const Vector q_true_v = true_q(spec, policy);

    epsilon = 0.0;
    for (Index s = 0; s < spec.n_states; ++s)
      for (Index a = 0; a < spec.n_actions; ++a)
        if (!mask.mask(s, a))
          epsilon = std::max(epsilon,
                             std::abs(q_lstd[spec.pair_index(s, a)] - q_true_v[spec.pair_index(s, a)]));

    q_hat = q_lstd - alpha * direction;
    q_true_final = q_true_v;
  }

  VerificationReport report;
  report.iterations = k_iters;
  report.alpha_used = alpha;
  report.epsilon_bound = epsilon;
  report.per_pair_gaps = by_state_action(spec, q_hat - q_true_final);
  report.max_violation = (report.per_pair_gaps.array() - epsilon).maxCoeff();
  report.passed = report.max_violation <= kSlack;
  return report;
}

Real tau_from_f_terms(const FTerms& terms) {
  Real tau = 1.0;
  for (Index s = 0; s < terms.f.size(); ++s) {
    if (terms.f_ood[s] <= 0.0)
      throw PreconditionViolation("Theorem 2 precondition violated: f_ood(s) <= 0");
    tau = std::min(tau, terms.f[s] / terms.f_ood[s]);
  }
  return std::clamp(tau, 1e-12, 1.0);
}

Real alpha_cql_state_value(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                           const PolicyMatrix& policy, const OodMask& mask, Real ridge) {
  const FTerms terms = compute_f_terms(spec, dist, policy, mask, ridge);
  const Real tau = tau_from_f_terms(terms);
  const Vector q_true_v = true_q(spec, policy);
  const Vector q_lstd = spec.features * lstdq_update(spec, dist, policy, q_true_v, ridge).w;
  const Vector v_lstd = policy_value(spec, policy, q_lstd);
  const Vector v_true = policy_value(spec, policy, q_true_v);

  Real alpha = 0.0;
  for (Index s = 0; s < spec.n_states; ++s)
    alpha = std::max(alpha, (v_lstd[s] - v_true[s]) / (tau * terms.f_ood[s]));
  return std::max(alpha, 0.0);
}

VerificationReport verify_theorem2(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                                   const PolicyMatrix& policy, const OodMask& mask,
                                   Real alpha_cql, int k_iters, Real ridge) {
  if (k_iters < 1) throw std::invalid_argument("k_iters must be at least 1");
  if (alpha_cql < 0.0) throw std::invalid_argument("alpha_cql must be nonnegative");
  validate(spec);
  validate(spec, dist);
  validate(spec, policy);
  validate(spec, mask);

  const Matrix pi_ood = ood_policy(policy, mask);
  for (Index s = 0; s < spec.n_states; ++s)
    if (pi_ood.row(s).sum() <= 0.0)
      throw PreconditionViolation(
          "Theorem 2 precondition violated: policy has no mass on masked actions at some state");

  const FTerms terms = compute_f_terms(spec, dist, policy, mask, ridge);
  for (Index s = 0; s < spec.n_states; ++s)
    if (terms.f[s] < -1e-10)
      throw PreconditionViolation("Theorem 2 precondition violated: f(s) < 0");
  const Real tau = tau_from_f_terms(terms);
  const Real alpha_scq = tau * alpha_cql;

  const Vector q_true_v = true_q(spec, policy);
  const Vector v_true = policy_value(spec, policy, q_true_v);

  VerificationReport report;
  report.iterations = k_iters;
  report.alpha_used = alpha_scq;
  report.epsilon_bound = 0.0;
  report.per_pair_gaps = Matrix::Zero(spec.n_states, 2);
  report.max_violation = -std::numeric_limits<Real>::infinity();

  Vector q_base = q_true_v;
  for (int iter = 0; iter < k_iters; ++iter) {
    const Vector q_scq =
        spec.features * scq_update(spec, dist, policy, mask, q_base, alpha_scq, ridge).w;
    const Vector q_cql = spec.features * cql_update(spec, dist, policy, q_base, alpha_cql, ridge).w;
    const Vector v_scq = policy_value(spec, policy, q_scq);
    const Vector v_cql = policy_value(spec, policy, q_cql);

    for (Index s = 0; s < spec.n_states; ++s) {
      const Real gap_order = v_cql[s] - v_scq[s];
      const Real gap_truth = v_scq[s] - v_true[s];
      report.per_pair_gaps(s, 0) = gap_order;
      report.per_pair_gaps(s, 1) = gap_truth;
      report.max_violation = std::max({report.max_violation, gap_order, gap_truth});
    }
    q_base = spec.features * lstdq_update(spec, dist, policy, q_base, ridge).w;
  }

  report.passed = report.max_violation <= kSlack;
  return report;
}

}  // namespace scq::linear
