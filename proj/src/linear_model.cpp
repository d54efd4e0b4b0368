#include "scq/linear/model.hpp"

#include <cmath>

namespace scq::linear {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void validate(const LinearMdpSpec& spec) {
  require(spec.n_states > 0, "n_states must be positive");
  require(spec.n_actions > 0, "n_actions must be positive");
  require(spec.feature_dim > 0, "feature_dim must be positive");
  require(spec.features.rows() == spec.n_pairs() && spec.features.cols() == spec.feature_dim,
          "features must have shape (n_states*n_actions, feature_dim)");
  require(spec.transition_measures.rows() == spec.n_states &&
              spec.transition_measures.cols() == spec.feature_dim,
          "transition_measures must have shape (n_states, feature_dim)");
  require(spec.reward_weights.size() == spec.feature_dim,
          "reward_weights must have length feature_dim");
  require(spec.discount >= 0.0 && spec.discount < 1.0, "discount must lie in [0, 1)");
  for (Index p = 0; p < spec.n_pairs(); ++p)
    require(spec.features.row(p).norm() <= 1.0 + 1e-9,
            "feature row " + std::to_string(p) + " has norm > 1");
  transition_matrix(spec);
}

void validate(const LinearMdpSpec& spec, const DatasetDistribution& dist) {
  require(dist.weights.size() == spec.n_pairs(), "weights must have length n_states*n_actions");
  require(dist.behavior_policy.rows() == spec.n_states &&
              dist.behavior_policy.cols() == spec.n_actions,
          "behavior_policy must have shape (n_states, n_actions)");
  require((dist.weights.array() >= 0.0).all(), "dataset weights must be nonnegative");
  require(std::abs(dist.weights.sum() - 1.0) <= 1e-10, "dataset weights must sum to 1");
  for (Index s = 0; s < spec.n_states; ++s) {
    require(std::abs(dist.behavior_policy.row(s).sum() - 1.0) <= 1e-10,
            "behavior_policy row " + std::to_string(s) + " must sum to 1");
    for (Index a = 0; a < spec.n_actions; ++a)
      require(dist.weights[spec.pair_index(s, a)] <= 0.0 || dist.behavior_policy(s, a) > 0.0,
              "behavior_policy must be positive wherever the dataset weight is positive");
  }
}

void validate(const LinearMdpSpec& spec, const PolicyMatrix& policy) {
  require(policy.probs.rows() == spec.n_states && policy.probs.cols() == spec.n_actions,
          "policy must have shape (n_states, n_actions)");
  require((policy.probs.array() >= 0.0).all() && (policy.probs.array() <= 1.0).all(),
          "policy entries must lie in [0, 1]");
  for (Index s = 0; s < spec.n_states; ++s)
    require(std::abs(policy.probs.row(s).sum() - 1.0) <= 1e-10,
            "policy row " + std::to_string(s) + " must sum to 1");
}

void validate(const LinearMdpSpec& spec, const OodMask& mask) {
  require(mask.mask.rows() == spec.n_states && mask.mask.cols() == spec.n_actions,
          "mask must have shape (n_states, n_actions)");
}

Matrix transition_matrix(const LinearMdpSpec& spec) {
  Matrix p = spec.features * spec.transition_measures.transpose();
  for (Index row = 0; row < p.rows(); ++row) {
    for (Index col = 0; col < p.cols(); ++col) {
      if (p(row, col) < 0.0) {
        if (p(row, col) < -1e-10)
          throw std::invalid_argument("transition row " + std::to_string(row) +
                                      " has a negative probability");
        p(row, col) = 0.0;
      }
    }
    if (std::abs(p.row(row).sum() - 1.0) > 1e-8)
      throw std::invalid_argument("transition row " + std::to_string(row) +
                                  " does not sum to 1");
  }
  return p;
}

Vector reward_vector(const LinearMdpSpec& spec) { return spec.features * spec.reward_weights; }

Matrix by_state_action(const LinearMdpSpec& spec, const Vector& pairs) {
  if (pairs.size() != spec.n_pairs())
    throw std::invalid_argument("pair vector has wrong length");
  Matrix m(spec.n_states, spec.n_actions);
  for (Index s = 0; s < spec.n_states; ++s)
    for (Index a = 0; a < spec.n_actions; ++a) m(s, a) = pairs[spec.pair_index(s, a)];
  return m;
}

Vector by_pairs(const Matrix& state_action) {
  Vector v(state_action.rows() * state_action.cols());
  for (Index s = 0; s < state_action.rows(); ++s)
    for (Index a = 0; a < state_action.cols(); ++a)
      v[s * state_action.cols() + a] = state_action(s, a);
  return v;
}

}  // namespace scq::linear
