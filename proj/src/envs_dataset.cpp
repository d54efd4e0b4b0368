#include "scq/envs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scq::envs {

namespace {

// Rolls one tier's controller until exactly n transitions are stored.
// Episodes end at the task's done signal or at the horizon; the final
// episode is truncated mid-flight if n lands inside it.
std::vector<Transition> collect(const EnvSpec& spec, const std::string& tier, Index n,
                                std::uint64_t seed, std::uint64_t stream_salt) {
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n));
  RngStream env_rng(seed, rng_stream::kEnv + 16 * stream_salt);
  ScriptedController controller(spec, tier, seed, stream_salt);
  while (static_cast<Index>(out.size()) < n) {
    Vector state = env_reset(spec, env_rng);
    controller.begin_episode(state);
    for (Index t = 0; t < spec.horizon; ++t) {
      const Vector action = controller.act(state)
                                .cwiseMax(spec.action_low)
                                .cwiseMin(spec.action_high);
      const StepResult step = env_step(spec, state, action);
      out.push_back({state, action, step.reward, step.next_state, step.done});
      state = step.next_state;
      if (step.done || static_cast<Index>(out.size()) == n) break;
    }
  }
  return out;
}

}  // namespace

Dataset generate_dataset(const EnvSpec& spec, std::string_view behavior, Index n_transitions,
                         std::uint64_t seed) {
  if (n_transitions <= 0) throw std::invalid_argument("nonempty dataset required");

  const std::string label(behavior);
  std::vector<Transition> transitions;
  if (label == "random" || label == "medium" || label == "expert") {
    transitions = collect(spec, label, n_transitions, seed, 0);
  } else if (label == "medium-replay-mix" || label == "medium-expert-mix") {
    const std::string other = label == "medium-replay-mix" ? "random" : "expert";
    const Index n_medium = (n_transitions + 1) / 2;
    const std::vector<Transition> medium = collect(spec, "medium", n_medium, seed, 1);
    const std::vector<Transition> mixed =
        collect(spec, other, n_transitions - n_medium, seed, 2);
    transitions.reserve(static_cast<std::size_t>(n_transitions));
    for (Index i = 0; i < n_transitions; ++i) {
      const std::size_t at = static_cast<std::size_t>(i / 2);
      transitions.push_back(i % 2 == 0 ? medium[at] : mixed[at]);
    }
  } else {
    throw std::invalid_argument("unknown behavior label: " + label);
  }

  Dataset dataset;
  dataset.meta = {spec.name, label,          seed, n_transitions,
                  spec.state_dim, spec.action_dim, 1.0};
  dataset.transitions = std::move(transitions);
  return dataset;
}

Dataset subsample(const Dataset& dataset, Real fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample fraction must lie in (0, 1]");
  const Index n = static_cast<Index>(dataset.transitions.size());
  const Index k = static_cast<Index>(std::floor(fraction * static_cast<Real>(n)));
  if (k < 1) throw std::invalid_argument("subsample would be empty");

  std::vector<Index> indices(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
  RngStream rng(seed, rng_stream::kEnv);
  for (Index i = 0; i < k; ++i) {
    const Index j = i + static_cast<Index>(rng.index(static_cast<std::uint64_t>(n - i)));
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }
  std::sort(indices.begin(), indices.begin() + k);

  Dataset out;
  out.meta = dataset.meta;
  out.meta.size = k;
  out.meta.fraction = dataset.meta.fraction * fraction;
  out.transitions.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i)
    out.transitions.push_back(dataset.transitions[static_cast<std::size_t>(indices[i])]);
  return out;
}

Matrix states_matrix(const Dataset& dataset) {
  const Index n = static_cast<Index>(dataset.transitions.size());
  Matrix m(n, dataset.meta.state_dim);
  for (Index i = 0; i < n; ++i)
    m.row(i) = dataset.transitions[static_cast<std::size_t>(i)].state.transpose();
  return m;
}

Matrix actions_matrix(const Dataset& dataset) {
  const Index n = static_cast<Index>(dataset.transitions.size());
  Matrix m(n, dataset.meta.action_dim);
  for (Index i = 0; i < n; ++i)
    m.row(i) = dataset.transitions[static_cast<std::size_t>(i)].action.transpose();
  return m;
}

Vector rewards_vector(const Dataset& dataset) {
  const Index n = static_cast<Index>(dataset.transitions.size());
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dataset.transitions[static_cast<std::size_t>(i)].reward;
  return v;
}

Matrix next_states_matrix(const Dataset& dataset) {
  const Index n = static_cast<Index>(dataset.transitions.size());
  Matrix m(n, dataset.meta.state_dim);
  for (Index i = 0; i < n; ++i)
    m.row(i) = dataset.transitions[static_cast<std::size_t>(i)].next_state.transpose();
  return m;
}

Vector dones_vector(const Dataset& dataset) {
  const Index n = static_cast<Index>(dataset.transitions.size());
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = dataset.transitions[static_cast<std::size_t>(i)].done ? 1.0 : 0.0;
  return v;
}

}  // namespace scq::envs
