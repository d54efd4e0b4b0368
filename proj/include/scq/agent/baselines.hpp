#pragma once

#include <string>

#include "scq/agent/agent.hpp"

namespace scq::agent {

enum class BaselineKind { kCql, kSacAlpha0, kScqLayerNorm };

BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

// Conservative baseline objective: the Bellman term shared with critic_loss
// plus alpha * (mean over states of the twin-average Q at one policy sample
// minus the twin-average Q at the dataset action). target_noise drives the
// backup action a', policy_noise the single policy draw per state.
CriticLossResult cql_critic_loss(const AgentState& agent, const BatchData& batch,
                                 const Matrix& target_noise, const Matrix& policy_noise);

// Config transforms that reuse the same training loop:
//   cql            density-ratio penalty instead of OOD sampling
//   sac_alpha0     no penalty at all (alpha = 0)
//   scq_layernorm  no penalty, layer-normalized critics
ScqConfig make_baseline(BaselineKind kind, ScqConfig base);

}  // namespace scq::agent
