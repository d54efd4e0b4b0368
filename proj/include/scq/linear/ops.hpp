#pragma once

#include "scq/linear/model.hpp"

namespace scq::linear {

// One application of the exact policy-evaluation backup:
// (B q)(s,a) = r(s,a) + discount * sum_s' P(s'|s,a) <policy(.|s'), q(s',.)>.
Vector bellman_backup(const LinearMdpSpec& spec, const PolicyMatrix& policy, const Vector& q);

// Unique fixed point of the backup, solved as a dense linear system.
// Residual is driven below 1e-10 in the sup norm (one refinement pass);
// a reciprocal condition estimate under 1e-12 or a residual that will not
// settle raises "ill-conditioned Bellman solve".
Vector true_q(const LinearMdpSpec& spec, const PolicyMatrix& policy);

// Weighted least-squares fit of the backup: solves
// (Phi^T D Phi + ridge I) w = Phi^T D (B q_prev). With ridge = 0 a singular
// normal matrix raises an error instructing the caller to pass ridge > 0.
QWeights lstdq_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                      const PolicyMatrix& policy, const Vector& q_prev, Real ridge);

// Applies the weighted projector Phi (Phi^T D Phi + ridge I)^-1 Phi^T D to v.
Vector projection_apply(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                        const Vector& v, Real ridge);

// Entrywise product policy .* mask. Deliberately unnormalized: rows may sum
// to less than 1, matching how the closed forms consume it.
Matrix ood_policy(const PolicyMatrix& policy, const OodMask& mask);

// Pair-indexed vector numerator(s,a) / behavior(a|s). Pairs with zero
// behavior probability use ratio 0 and are counted in *n_unsupported when
// given; a nonzero numerator on such a pair with nonzero dataset weight
// raises "OOD penalty requires behavior support".
Vector ratio_vector(const Matrix& numerator, const DatasetDistribution& dist,
                    int* n_unsupported = nullptr);

// Conservative update: the least-squares backup minus alpha times the
// projected mass that the policy places on masked actions, in weight space:
// w = w_lstdq - alpha * (Phi^T D Phi + ridge I)^-1 Phi^T D (pi_ood / pi_beta).
QWeights scq_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                    const PolicyMatrix& policy, const OodMask& mask, const Vector& q_prev,
                    Real alpha, Real ridge);

// Uniformly conservative update with penalty vector (pi - pi_beta) / pi_beta.
QWeights cql_update(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                    const PolicyMatrix& policy, const Vector& q_prev, Real alpha, Real ridge);

struct FTerms {
  Vector f;      // per state: <pi(.|s), (P [(pi - pi_beta)/pi_beta])(s,.)>
  Vector f_ood;  // same with numerator pi_ood
  Vector f_idd;  // same with numerator pi_idd - pi_beta, pi_idd = pi .* ~mask
};

// The three projected-penalty state functionals. Satisfies
// f = f_idd + f_ood entrywise to within solver roundoff.
FTerms compute_f_terms(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                       const PolicyMatrix& policy, const OodMask& mask, Real ridge);

// Smallest alpha >= 0 for which the conservative update is pointwise below
// the true Q on every masked pair:
//   max over masked pairs of max((Q_lstdq - Q_true) / penalty_direction, 0)
// where penalty_direction = Phi (Phi^T D Phi)^-1 Phi^T D (pi_ood/pi_beta).
// A nonpositive direction on a masked pair raises
// "penalty direction vanishes at OOD pair".
Real alpha_min_pointwise(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                         const PolicyMatrix& policy, const OodMask& mask, const Vector& q_prev,
                         Real ridge);

}  // namespace scq::linear
