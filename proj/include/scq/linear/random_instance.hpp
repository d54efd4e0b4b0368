#pragma once

#include <cstdint>

#include "scq/linear/model.hpp"
#include "scq/rng.hpp"

namespace scq::linear {

struct InstanceParams {
  Index n_states = 4;
  Index n_actions = 3;
  Index feature_dim = 6;
  Real discount = 0.9;
  // Fraction of each state's actions marked out-of-distribution; at least
  // min_masked_per_state survive, never all actions of a state.
  Real mask_fraction = 0.34;
  Index min_masked_per_state = 1;
  // Leading feature coordinates are scaled indicators of a random partition
  // of the pairs into this many groups; any remaining coordinates are a
  // random ball draw. With n_feature_groups == feature_dim the weighted
  // projector becomes per-group averaging, which maps nonnegative vectors to
  // nonnegative vectors, so such instances always satisfy the verifiers'
  // penalty-direction preconditions. Zero means no group structure.
  Index n_feature_groups = 4;
  // Weight on the indicator coordinate; the ball part uses the remaining
  // norm budget. Ignored when n_feature_groups is 0.
  Real group_coordinate = 0.9;
};

// Seeded MDP whose transition kernel is exactly linear in the features by
// construction: each feature row is a scaled group indicator (or, without
// groups, the constant 1/sqrt(2) in the first coordinate) plus a ball draw
// in the remaining coordinates; measure rows carry matching per-group masses
// with zero-column-sum perturbations in the ball coordinates, so rows of
// Phi mu^T are exact probability vectors with entries bounded away from
// zero. Feature rows have norm <= 1; rewards are scaled so max |r| = 1.
LinearMdpSpec random_instance(const InstanceParams& params, std::uint64_t seed);

// Full-support behavior policy and its discounted state occupancy under the
// instance dynamics (uniform start), combined into pair weights.
DatasetDistribution random_behavior(const LinearMdpSpec& spec, std::uint64_t seed);

// Row-stochastic policy with entries bounded away from zero.
PolicyMatrix random_policy(Index n_states, Index n_actions, std::uint64_t seed);

// (1 - eta) * onehot(argmax_a q(s,a)) + eta * uniform.
PolicyMatrix greedy_mix_policy(const Matrix& q_by_state_action, Real eta);

// Random mask honoring InstanceParams' density bounds.
OodMask random_mask(const InstanceParams& params, std::uint64_t seed);

}  // namespace scq::linear
