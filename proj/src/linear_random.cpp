#include "scq/linear/random_instance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/LU>

#include "scq/linear/ops.hpp"

namespace scq::linear {

namespace {

// Uniform draw from the ball of the given radius (direction times a radius
// with the correct density for the dimension).
Vector ball_point(RngStream& rng, Index dim, Real radius) {
  Vector direction = rng.normal_vector(dim);
  const Real norm = direction.norm();
  if (norm < 1e-12) return Vector::Zero(dim);
  const Real r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<Real>(dim));
  return direction * (r / norm);
}

Matrix positive_row_stochastic(RngStream& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(0.1, 1.0);
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

}  // namespace

LinearMdpSpec random_instance(const InstanceParams& params, std::uint64_t seed) {
  const Index n_groups = params.n_feature_groups > 0 ? params.n_feature_groups : 1;
  if (params.feature_dim < n_groups)
    throw std::invalid_argument("feature_dim must be at least the number of feature groups");
  RngStream rng(seed, rng_stream::kInit);

  LinearMdpSpec spec;
  spec.n_states = params.n_states;
  spec.n_actions = params.n_actions;
  spec.feature_dim = params.feature_dim;
  spec.discount = params.discount;
  if (n_groups > spec.n_pairs())
    throw std::invalid_argument("more feature groups than state-action pairs");

  const Real c = params.n_feature_groups > 0 ? params.group_coordinate : 1.0 / std::sqrt(2.0);
  const Index rest = params.feature_dim - n_groups;
  if (c <= 0.0 || c > 1.0 || (rest > 0 && c >= 1.0))
    throw std::invalid_argument("group_coordinate must lie in (0, 1]; below 1 with ball coordinates");
  const Real psi_radius = rest > 0 ? 0.95 * std::sqrt(1.0 - c * c) : 0.0;

  // Shuffle pairs and deal them round-robin so every group is nonempty.
  std::vector<Index> order(static_cast<std::size_t>(spec.n_pairs()));
  std::iota(order.begin(), order.end(), Index{0});
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<Index> group_of(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    group_of[static_cast<std::size_t>(order[i])] = static_cast<Index>(i) % n_groups;

  spec.features = Matrix::Zero(spec.n_pairs(), spec.feature_dim);
  for (Index p = 0; p < spec.n_pairs(); ++p) {
    spec.features(p, group_of[static_cast<std::size_t>(p)]) = c;
    if (rest > 0)
      spec.features.row(p).tail(rest) = ball_point(rng, rest, psi_radius).transpose();
  }

  // Measure rows: the indicator coordinates carry per-group masses
  // beta(g, s') / c with each group's masses summing to 1 over next states,
  // so every transition row sums to exactly 1. The ball coordinates get
  // zero-column-sum perturbations scaled so each probability stays above
  // 0.1 * beta (Cauchy-Schwarz bound against the feature-ball radius).
  Matrix beta(n_groups, spec.n_states);
  for (Index g = 0; g < n_groups; ++g) {
    for (Index s = 0; s < spec.n_states; ++s) beta(g, s) = rng.uniform(0.5, 1.5);
    beta.row(g) /= beta.row(g).sum();
  }

  spec.transition_measures.resize(spec.n_states, spec.feature_dim);
  spec.transition_measures.leftCols(n_groups) = beta.transpose() / c;
  if (rest > 0) {
    Matrix eta = rng.normal_matrix(spec.n_states, rest);
    eta.rowwise() -= eta.colwise().mean();
    Real scale = std::numeric_limits<Real>::infinity();
    for (Index s = 0; s < spec.n_states; ++s) {
      const Real norm = eta.row(s).norm();
      if (norm > 1e-12)
        scale = std::min(scale, 0.9 * beta.col(s).minCoeff() / (psi_radius * norm));
    }
    if (!std::isfinite(scale)) scale = 0.0;
    spec.transition_measures.rightCols(rest) = scale * eta;
  }

  Vector theta = rng.normal_vector(spec.feature_dim);
  const Real max_reward = (spec.features * theta).lpNorm<Eigen::Infinity>();
  if (max_reward > 1e-12) theta /= max_reward;
  spec.reward_weights = theta;

  validate(spec);
  return spec;
}

DatasetDistribution random_behavior(const LinearMdpSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, rng_stream::kBatch);
  DatasetDistribution dist;
  dist.behavior_policy = positive_row_stochastic(rng, spec.n_states, spec.n_actions);

  // Discounted state occupancy from a uniform start:
  // d = (1 - g) (I - g P_beta^T)^-1 (1/S).
  const Matrix p = transition_matrix(spec);
  Matrix p_beta = Matrix::Zero(spec.n_states, spec.n_states);
  for (Index s = 0; s < spec.n_states; ++s)
    for (Index a = 0; a < spec.n_actions; ++a)
      p_beta.row(s) += dist.behavior_policy(s, a) * p.row(spec.pair_index(s, a));

  const Matrix system = Matrix::Identity(spec.n_states, spec.n_states) -
                        spec.discount * p_beta.transpose();
  Vector start = Vector::Constant(spec.n_states, 1.0 / static_cast<Real>(spec.n_states));
  Vector occupancy = (1.0 - spec.discount) * Eigen::PartialPivLU<Matrix>(system).solve(start);
  occupancy = occupancy.cwiseMax(0.0);
  occupancy /= occupancy.sum();

  dist.weights.resize(spec.n_pairs());
  for (Index s = 0; s < spec.n_states; ++s)
    for (Index a = 0; a < spec.n_actions; ++a)
      dist.weights[spec.pair_index(s, a)] = occupancy[s] * dist.behavior_policy(s, a);
  dist.weights /= dist.weights.sum();

  validate(spec, dist);
  return dist;
}

PolicyMatrix random_policy(Index n_states, Index n_actions, std::uint64_t seed) {
  RngStream rng(seed, rng_stream::kActor);
  return PolicyMatrix{positive_row_stochastic(rng, n_states, n_actions)};
}

PolicyMatrix greedy_mix_policy(const Matrix& q_by_state_action, Real eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must lie in [0, 1]");
  const Index n_states = q_by_state_action.rows();
  const Index n_actions = q_by_state_action.cols();
  Matrix probs = Matrix::Constant(n_states, n_actions, eta / static_cast<Real>(n_actions));
  for (Index s = 0; s < n_states; ++s) {
    Index best = 0;
    q_by_state_action.row(s).maxCoeff(&best);
    probs(s, best) += 1.0 - eta;
  }
  return PolicyMatrix{probs};
}

OodMask random_mask(const InstanceParams& params, std::uint64_t seed) {
  RngStream rng(seed, rng_stream::kOod);
  const Index n_states = params.n_states;
  const Index n_actions = params.n_actions;
  Index n_masked = static_cast<Index>(std::lround(params.mask_fraction * static_cast<Real>(n_actions)));
  n_masked = std::max(n_masked, params.min_masked_per_state);
  n_masked = std::min(n_masked, n_actions - 1);
  if (n_masked < 1) throw std::invalid_argument("need at least 2 actions to mask one per state");

  OodMask out;
  out.mask = BoolGrid::Constant(n_states, n_actions, false);
  std::vector<Index> order(static_cast<std::size_t>(n_actions));
  for (Index s = 0; s < n_states; ++s) {
    std::iota(order.begin(), order.end(), Index{0});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);
    for (Index k = 0; k < n_masked; ++k) out.mask(s, order[static_cast<std::size_t>(k)]) = true;
  }
  return out;
}

}  // namespace scq::linear
