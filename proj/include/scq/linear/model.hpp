#pragma once

#include <stdexcept>
#include <string>

#include "scq/types.hpp"

namespace scq::linear {

// Thrown when an input breaks a mathematical precondition of a verifier
// (as opposed to a malformed argument). Callers that sweep over random
// instances catch this to count non-qualifying instances instead of aborting.
struct PreconditionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite MDP whose dynamics and reward are exactly linear in a known feature
// map: P(s'|s,a) = <phi(s,a), mu(s')> and r(s,a) = <phi(s,a), theta>.
// State-action pairs are indexed row-major: pair = s * n_actions + a.
struct LinearMdpSpec {
  Index n_states = 0;
  Index n_actions = 0;
  Index feature_dim = 0;
  Matrix features;             // (n_states*n_actions, feature_dim), row norms <= 1
  Matrix transition_measures;  // (n_states, feature_dim)
  Vector reward_weights;       // (feature_dim)
  Real discount = 0.0;

  Index n_pairs() const { return n_states * n_actions; }
  Index pair_index(Index s, Index a) const { return s * n_actions + a; }
};

// Weighting of state-action pairs under the data-collection policy:
// weights(s,a) = d(s) * behavior_policy(a|s), a probability vector over pairs.
struct DatasetDistribution {
  Vector weights;          // (n_pairs), >= 0, sums to 1
  Matrix behavior_policy;  // (n_states, n_actions), rows sum to 1
};

struct PolicyMatrix {
  Matrix probs;  // (n_states, n_actions), rows sum to 1, entries in [0,1]
};

// Marks which actions count as out-of-distribution at each state.
struct OodMask {
  BoolGrid mask;  // (n_states, n_actions)
};

// Weight vector of a linear Q-function: Q(s,a) = <phi(s,a), w>.
struct QWeights {
  Vector w;
};

// Outcome of one automated conservatism check. For the pointwise check,
// per_pair_gaps is (n_states, n_actions) holding Q_hat - Q_true and
// epsilon_bound is the measured interpolation error on unmasked pairs.
// For the state-value check, per_pair_gaps is (n_states, 2) holding the two
// sandwich gaps (V_cql - V_scq, V_scq - V_true) and epsilon_bound is 0.
struct VerificationReport {
  int iterations = 0;
  Real max_violation = 0.0;
  Matrix per_pair_gaps;
  Real alpha_used = 0.0;
  Real epsilon_bound = 0.0;
  bool passed = false;
};

// Each validator throws std::invalid_argument naming the violated invariant.
void validate(const LinearMdpSpec& spec);
void validate(const LinearMdpSpec& spec, const DatasetDistribution& dist);
void validate(const LinearMdpSpec& spec, const PolicyMatrix& policy);
void validate(const LinearMdpSpec& spec, const OodMask& mask);

// Dense transition kernel P = features * transition_measures^T with entries
// in [-1e-10, 0) clamped to zero. Throws if any entry is below -1e-10 or a
// row sum strays more than 1e-8 from 1.
Matrix transition_matrix(const LinearMdpSpec& spec);

Vector reward_vector(const LinearMdpSpec& spec);

// Reshape a pair-indexed vector to (n_states, n_actions) and back.
Matrix by_state_action(const LinearMdpSpec& spec, const Vector& pairs);
Vector by_pairs(const Matrix& state_action);

}  // namespace scq::linear
