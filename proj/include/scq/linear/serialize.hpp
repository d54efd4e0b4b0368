#pragma once

#include <json.hpp>

#include "scq/linear/model.hpp"

namespace scq::linear {

// Instance documents carry {n_states, n_actions, feature_dim,
// features (row-major), transition_measures (row-major), reward_weights,
// discount}; reports carry every VerificationReport field with
// per_pair_gaps row-major.
nlohmann::json to_json(const LinearMdpSpec& spec);
LinearMdpSpec spec_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const VerificationReport& report);
VerificationReport report_from_json(const nlohmann::json& doc);

}  // namespace scq::linear
