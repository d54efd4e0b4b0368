#include "scq/nn/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scq::nn {

AdamState make_adam(Index n_params, Real lr) {
  if (n_params <= 0) throw std::invalid_argument("adam state needs a positive parameter count");
  AdamState state;
  state.m = Vector::Zero(n_params);
  state.v = Vector::Zero(n_params);
  state.lr = lr;
  return state;
}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  if (params.size() != state.m.size() || grads.size() != state.m.size())
    throw std::invalid_argument("adam step sizes do not match the state");

  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = (state.beta2 * state.v.array() + (1.0 - state.beta2) * grads.array().square())
                .matrix();

  const Real bias1 = 1.0 - std::pow(state.beta1, static_cast<Real>(state.step));
  const Real bias2 = 1.0 - std::pow(state.beta2, static_cast<Real>(state.step));
  params.array() -=
      state.lr * (state.m.array() / bias1) / ((state.v.array() / bias2).sqrt() + state.eps);
}

void polyak_update(Vector& target, const Vector& online, Real upsilon) {
  if (target.size() != online.size())
    throw std::invalid_argument("polyak update sizes do not match");
  if (upsilon < 0.0 || upsilon > 1.0)
    throw std::invalid_argument("polyak mixing rate must lie in [0, 1]");
  target = (1.0 - upsilon) * target + upsilon * online;
}

Real lr_at(const LrSchedule& schedule, std::int64_t step) {
  if (schedule.kind == LrSchedule::Kind::kConstant) return schedule.base;
  if (schedule.total_steps <= 0)
    throw std::invalid_argument("cosine schedule needs a positive step count");
  const Real progress = std::clamp(
      static_cast<Real>(step) / static_cast<Real>(schedule.total_steps), 0.0, 1.0);
  return schedule.base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace scq::nn
