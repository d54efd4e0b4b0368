#pragma once

#include <vector>

#include "scq/linear/ops.hpp"

namespace scq::linear {

// Pointwise pessimism check. Runs k_iters conservative updates starting from
// the first policy's exact fixed point, choosing alpha = alpha_min_pointwise
// at each step; iteration j evaluates policy_sequence[min(j, size-1)], so a
// single policy may be reused.
// Reports epsilon_bound = max over unmasked pairs of |Q_lstdq - Q_true| at
// the final step and passes iff Q_hat <= Q_true + epsilon + 1e-8 everywhere.
// Raises PreconditionViolation if the penalty direction is negative at any
// unmasked pair (the pessimism argument needs it nonnegative everywhere) or,
// via alpha_min_pointwise, nonpositive at a masked pair.
VerificationReport verify_theorem1(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                                   const std::vector<PolicyMatrix>& policy_sequence,
                                   const OodMask& mask, int k_iters, Real ridge);

// State-value sandwich check. Computes tau = clamp(min(1, min_s f/f_ood)),
// sets alpha_scq = tau * alpha_cql, advances a plain least-squares chain from
// the true Q, and at each step requires
//   V_cql(s) <= V_scq(s) <= V_true(s) + 1e-8 at every state,
// where V_hat(s) = <pi(.|s), Q_hat(s,.)>. Raises PreconditionViolation when
// f_ood(s) <= 0 or the policy puts no mass on masked actions at some state
// ("Theorem 2 precondition violated"), or when f(s) < -1e-10 (the
// less-conservative side of the sandwich needs f nonnegative).
VerificationReport verify_theorem2(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                                   const PolicyMatrix& policy, const OodMask& mask,
                                   Real alpha_cql, int k_iters, Real ridge);

// The scaling applied to alpha_cql in the state-value check, clamped to
// (1e-12, 1] so it stays strictly positive.
Real tau_from_f_terms(const FTerms& terms);

// Smallest alpha_cql that makes both sandwich inequalities provable for the
// given instance: max over states of max((V_lstdq - V_true) / (tau f_ood), 0)
// with the chain started at the true Q. Used by instance sweeps to pick a
// qualifying alpha before calling verify_theorem2.
Real alpha_cql_state_value(const LinearMdpSpec& spec, const DatasetDistribution& dist,
                           const PolicyMatrix& policy, const OodMask& mask, Real ridge);

}  // namespace scq::linear
