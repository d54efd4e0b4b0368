#pragma once

#include <cstdint>

#include "scq/types.hpp"

namespace scq::nn {

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  Real lr = 3e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

AdamState make_adam(Index n_params, Real lr);

// Standard bias-corrected moment update, in place.
void adam_step(AdamState& state, Vector& params, const Vector& grads);

// target <- (1 - upsilon) * target + upsilon * online.
void polyak_update(Vector& target, const Vector& online, Real upsilon);

struct LrSchedule {
  enum class Kind { kConstant, kCosine };
  Kind kind = Kind::kConstant;
  Real base = 3e-4;
  std::int64_t total_steps = 1;
};

Real lr_at(const LrSchedule& schedule, std::int64_t step);

}  // namespace scq::nn
