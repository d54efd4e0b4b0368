#include "scq/agent/baselines.hpp"

#include <stdexcept>

namespace scq::agent {

BaselineKind parse_baseline(const std::string& name) {
  if (name == "cql") return BaselineKind::kCql;
  if (name == "sac_alpha0") return BaselineKind::kSacAlpha0;
  if (name == "scq_layernorm") return BaselineKind::kScqLayerNorm;
  throw std::invalid_argument("unknown baseline: " + name);
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kCql: return "cql";
    case BaselineKind::kSacAlpha0: return "sac_alpha0";
    case BaselineKind::kScqLayerNorm: return "scq_layernorm";
  }
  throw std::invalid_argument("unknown baseline kind");
}

ScqConfig make_baseline(BaselineKind kind, ScqConfig base) {
  switch (kind) {
    case BaselineKind::kCql:
      base.critic_loss_kind = CriticLossKind::kCql;
      base.ood_machinery = false;
      base.warmup_iters = 0;
      break;
    case BaselineKind::kSacAlpha0:
      base.alpha = 0.0;
      base.ood_machinery = false;
      base.critic_loss_kind = CriticLossKind::kScq;
      break;
    case BaselineKind::kScqLayerNorm:
      base.alpha = 0.0;
      base.ood_machinery = false;
      base.critic_loss_kind = CriticLossKind::kScq;
      base.critic_layer_norm = true;
      break;
  }
  return base;
}

}  // namespace scq::agent
