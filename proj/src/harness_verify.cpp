#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "scq/harness/harness.hpp"
#include "scq/linear/ops.hpp"
#include "scq/linear/random_instance.hpp"
#include "scq/linear/verify.hpp"
#include "scq/util/io.hpp"

namespace scq::harness {

namespace {

// Partition features have full column rank, so the normal equations are
// solvable without regularization and exact features keep a zero
// interpolation error; a singular draw surfaces as the solver's error.
constexpr Real kRidge = 0.0;

linear::InstanceParams sweep_params(Real d_fraction) {
  linear::InstanceParams params;
  params.n_states = 4;
  params.n_actions = 3;
  const Index pairs = params.n_states * params.n_actions;
  params.feature_dim =
      std::clamp<Index>(static_cast<Index>(std::llround(d_fraction * static_cast<Real>(pairs))),
                        1, pairs);
  params.n_feature_groups = params.feature_dim;
  params.group_coordinate = 1.0;
  return params;
}

Vector policy_state_values(const linear::LinearMdpSpec& spec, const linear::PolicyMatrix& policy,
                           const Vector& q) {
  return (linear::by_state_action(spec, q).array() * policy.probs.array()).rowwise().sum();
}

// Smallest alpha_cql for which the sandwich's upper side is provable at
// every point of a k-step least-squares chain started from the true Q: at
// each step the projection overshoot (V_lstdq - V_true) must be covered by
// tau * alpha * f_ood statewise.
Real alpha_cql_chain(const linear::LinearMdpSpec& spec, const linear::DatasetDistribution& dist,
                     const linear::PolicyMatrix& policy, const linear::OodMask& mask,
                     int k_iters) {
  const auto terms = linear::compute_f_terms(spec, dist, policy, mask, kRidge);
  for (Index s = 0; s < spec.n_states; ++s) {
    if (terms.f_ood[s] <= 0.0) {
      throw linear::PreconditionViolation(
          "Theorem 2 precondition violated: policy has no mass on masked actions at some state");
    }
  }
  const Real tau = linear::tau_from_f_terms(terms);
  const Vector v_true = policy_state_values(spec, policy, linear::true_q(spec, policy));

  Real alpha = 0.0;
  Vector q_base = linear::true_q(spec, policy);
  for (int iter = 0; iter < k_iters; ++iter) {
    const Vector q_lstd =
        spec.features * linear::lstdq_update(spec, dist, policy, q_base, kRidge).w;
    const Vector v_lstd = policy_state_values(spec, policy, q_lstd);
    for (Index s = 0; s < spec.n_states; ++s) {
      alpha = std::max(alpha, (v_lstd[s] - v_true[s]) / (tau * terms.f_ood[s]));
    }
    q_base = q_lstd;
  }
  return std::max(alpha, 0.0);
}

void record(TheoremTally& tally, const linear::VerificationReport& report) {
  if (report.passed) {
    ++tally.passed;
  } else {
    ++tally.failed;
  }
  tally.worst_violation = std::max(tally.worst_violation, report.max_violation);
  tally.max_epsilon_bound = std::max(tally.max_epsilon_bound, report.epsilon_bound);
}

nlohmann::json tally_json(const TheoremTally& tally) {
  nlohmann::json out;
  out["passed"] = tally.passed;
  out["failed"] = tally.failed;
  out["precondition_skips"] = tally.precondition_skips;
  out["worst_violation"] = tally.worst_violation;
  out["max_epsilon_bound"] = tally.max_epsilon_bound;
  return out;
}

}  // namespace

VerifySummary verify_linear(int n_instances, Real d_fraction, int k_iters, std::uint64_t seed) {
  if (n_instances < 1) throw std::invalid_argument("verify_linear needs at least one instance");
  if (!(d_fraction > 0.0 && d_fraction <= 1.0)) {
    throw std::invalid_argument("d_fraction must be in (0, 1]");
  }
  if (k_iters < 1) throw std::invalid_argument("verify_linear needs at least one iteration");

  const auto params = sweep_params(d_fraction);
  VerifySummary summary;
  summary.n_instances = n_instances;
  summary.d_fraction = d_fraction;
  summary.k_iters = k_iters;
  summary.seed = seed;
  summary.pointwise.worst_violation = -std::numeric_limits<Real>::infinity();
  summary.state_value.worst_violation = -std::numeric_limits<Real>::infinity();

  for (int i = 0; i < n_instances; ++i) {
    const std::uint64_t base = seed + 1000 * static_cast<std::uint64_t>(i);
    const auto spec = linear::random_instance(params, base);
    const auto dist = linear::random_behavior(spec, base + 1);
    const auto mask = linear::random_mask(params, base + 3);

    std::vector<linear::PolicyMatrix> drifting;
    for (std::uint64_t j = 0; j < 5; ++j) {
      drifting.push_back(linear::random_policy(params.n_states, params.n_actions, base + 10 + j));
    }
    try {
      record(summary.pointwise,
             linear::verify_theorem1(spec, dist, drifting, mask, k_iters, kRidge));
    } catch (const linear::PreconditionViolation&) {
      ++summary.pointwise.precondition_skips;
    }

    const Vector q_lstd_w =
        linear::lstdq_update(spec, dist, drifting.front(), Vector::Zero(spec.n_pairs()), kRidge)
            .w;
    const auto policy =
        linear::greedy_mix_policy(linear::by_state_action(spec, spec.features * q_lstd_w), 0.05);
    try {
      const Real alpha_cql = alpha_cql_chain(spec, dist, policy, mask, k_iters);
      record(summary.state_value,
             linear::verify_theorem2(spec, dist, policy, mask, alpha_cql, k_iters, kRidge));
    } catch (const linear::PreconditionViolation&) {
      ++summary.state_value.precondition_skips;
    }
  }

  if (summary.pointwise.passed + summary.pointwise.failed == 0) {
    summary.pointwise.worst_violation = 0.0;
  }
  if (summary.state_value.passed + summary.state_value.failed == 0) {
    summary.state_value.worst_violation = 0.0;
  }
  return summary;
}

std::string verify_summary_json(const VerifySummary& summary) {
  const std::string key = "verify-linear n=" + std::to_string(summary.n_instances) +
                          " d=" + format_double(summary.d_fraction) +
                          " k=" + std::to_string(summary.k_iters) +
                          " seed=" + std::to_string(summary.seed);
  nlohmann::json out;
  out["config_hash"] = hex64(fnv1a64(key));
  out["seeds"] = std::vector<std::uint64_t>{summary.seed};
  out["n_instances"] = summary.n_instances;
  out["d_fraction"] = summary.d_fraction;
  out["k_iters"] = summary.k_iters;
  out["pointwise_pessimism"] = tally_json(summary.pointwise);
  out["state_value_sandwich"] = tally_json(summary.state_value);
  return out.dump(2) + "\n";
}

}  // namespace scq::harness
