#include "scq/envs/env.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace scq::envs {

namespace {

constexpr Real kDt = 0.3;
constexpr Real kWallGap = 1e-3;
constexpr Real kMazeWidth = 7.0;
constexpr Real kMazeHeight = 5.0;
constexpr Real kGoalX = 6.5;
constexpr Real kGoalY = 0.5;
constexpr Real kGoalRadius = 0.5;
constexpr Real kPushDamping = 0.9;
constexpr Real kPushTargetX = 1.2;
constexpr Real kPushTargetY = -0.8;
constexpr Real kPushBound = 2.0;

Real bandit_reward(Real a) {
  const auto bump = [](Real x, Real center, Real width) {
    const Real z = (x - center) / width;
    return std::exp(-z * z);
  };
  return 0.20 * bump(a, 0.30, 0.20) + 0.15 * bump(a, -0.40, 0.25) -
         0.80 * bump(a, 0.85, 0.10) - 0.80 * bump(a, -0.85, 0.10);
}

// One axis of maze motion: the candidate point either lands in open space
// or is clamped just inside the boundary of the current cell.
Real maze_slide(Real from, Real delta, bool blocked_at_candidate) {
  const Real candidate = from + delta;
  if (!blocked_at_candidate) return candidate;
  if (delta > 0.0) return std::floor(from) + 1.0 - kWallGap;
  return std::floor(from) + kWallGap;
}

Vector clip_action(const EnvSpec& spec, const Vector& action) {
  return action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

void check_step_inputs(const EnvSpec& spec, const Vector& state, const Vector& action) {
  if (state.size() != spec.state_dim || action.size() != spec.action_dim)
    throw std::invalid_argument("environment step dimensions do not match the spec");
  if (!state.allFinite() || !action.allFinite())
    throw std::invalid_argument("environment step requires finite inputs");
}

}  // namespace

EnvSpec make_env(std::string_view name) {
  EnvSpec spec;
  spec.name = std::string(name);
  if (name == "line-bandit") {
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.horizon = 1;
    spec.reward_kind = RewardKind::kDense;
  } else if (name == "point-maze") {
    spec.state_dim = 2;
    spec.action_dim = 2;
    spec.horizon = 60;
    spec.reward_kind = RewardKind::kSparse;
  } else if (name == "push-slide") {
    spec.state_dim = 4;
    spec.action_dim = 2;
    spec.horizon = 50;
    spec.reward_kind = RewardKind::kDense;
  } else {
    throw std::invalid_argument("unknown environment: " + spec.name);
  }
  spec.action_low = Vector::Constant(spec.action_dim, -1.0);
  spec.action_high = Vector::Constant(spec.action_dim, 1.0);
  return spec;
}

bool maze_blocked(Real x, Real y) {
  if (x <= 0.0 || x >= kMazeWidth || y <= 0.0 || y >= kMazeHeight) return true;
  const int cx = static_cast<int>(std::floor(x));
  const int cy = static_cast<int>(std::floor(y));
  return cx >= 1 && cx <= 5 && cy <= 2;
}

bool maze_move_clear(const Vector& from, const Vector& to) {
  if (maze_blocked(from[0], from[1])) return false;
  if (maze_blocked(to[0], from[1])) return false;
  return !maze_blocked(to[0], to[1]);
}

StepResult env_step(const EnvSpec& spec, const Vector& state, const Vector& action) {
  check_step_inputs(spec, state, action);
  const Vector a = clip_action(spec, action);

  if (spec.name == "line-bandit") {
    Vector next(1);
    next << a[0];
    return {next, bandit_reward(a[0]), true};
  }

  if (spec.name == "point-maze") {
    const Real x0 = state[0];
    const Real y0 = state[1];
    const Real x1 = maze_slide(x0, kDt * a[0], maze_blocked(x0 + kDt * a[0], y0));
    const Real y1 = maze_slide(y0, kDt * a[1], maze_blocked(x1, y0 + kDt * a[1]));
    Vector next(2);
    next << x1, y1;
    const Real gx = x1 - kGoalX;
    const Real gy = y1 - kGoalY;
    const bool at_goal = gx * gx + gy * gy <= kGoalRadius * kGoalRadius;
    return {next, at_goal ? 1.0 : 0.0, at_goal};
  }

  if (spec.name == "push-slide") {
    Vector next(4);
    for (Index i = 0; i < 2; ++i) {
      Real v = kPushDamping * state[2 + i] + kDt * a[i];
      Real p = state[i] + kDt * v;
      if (p < -kPushBound) {
        p = -kPushBound;
        v = 0.0;
      } else if (p > kPushBound) {
        p = kPushBound;
        v = 0.0;
      }
      next[i] = p;
      next[2 + i] = v;
    }
    const Real dx = next[0] - kPushTargetX;
    const Real dy = next[1] - kPushTargetY;
    const Real reward = -std::sqrt(dx * dx + dy * dy) - 0.05 * a.squaredNorm();
    return {next, reward, false};
  }

  throw std::invalid_argument("unknown environment: " + spec.name);
}

Vector env_reset(const EnvSpec& spec, RngStream& rng) {
  if (spec.name == "line-bandit") return Vector::Zero(1);
  if (spec.name == "point-maze") {
    Vector s(2);
    s << 0.5 + rng.uniform(-0.1, 0.1), 0.5 + rng.uniform(-0.1, 0.1);
    return s;
  }
  if (spec.name == "push-slide") {
    Vector s(4);
    s << -1.5 + rng.uniform(-0.1, 0.1), 1.5 + rng.uniform(-0.1, 0.1), 0.0, 0.0;
    return s;
  }
  throw std::invalid_argument("unknown environment: " + spec.name);
}

ScriptedController::ScriptedController(EnvSpec spec, std::string tier, std::uint64_t seed,
                                       std::uint64_t stream_salt)
    : spec_(std::move(spec)),
      tier_(std::move(tier)),
      rng_(seed, rng_stream::kActor + 16 * stream_salt) {
  if (tier_ != "random" && tier_ != "medium" && tier_ != "expert")
    throw std::invalid_argument("unknown controller tier: " + tier_);
}

void ScriptedController::begin_episode(const Vector& start) {
  (void)start;
  waypoints_.clear();
  waypoint_ = 0;
  if (spec_.name != "point-maze" || tier_ == "random") return;

  const auto cell_center = [](Real cx, Real cy) {
    Vector c(2);
    c << cx + 0.5, cy + 0.5;
    return c;
  };
  if (tier_ == "medium") {
    speed_ = rng_.uniform(0.4, 0.9);
    noise_ = 0.25;
    // A third of medium episodes wander to a random open cell first.
    if (rng_.uniform01() < 0.3) {
      Real cx = 0.0;
      Real cy = 0.0;
      do {
        cx = static_cast<Real>(rng_.index(7));
        cy = static_cast<Real>(rng_.index(5));
      } while (maze_blocked(cx + 0.5, cy + 0.5));
      waypoints_.push_back(cell_center(cx, cy));
    }
  } else {
    speed_ = 1.0;
    noise_ = 0.02;
  }
  waypoints_.push_back(cell_center(0.0, 3.0));
  waypoints_.push_back(cell_center(6.0, 3.0));
  waypoints_.push_back(cell_center(6.0, 0.0));
}

Vector ScriptedController::act(const Vector& state) {
  if (spec_.name == "line-bandit") {
    Vector a(1);
    if (tier_ == "random")
      a << rng_.uniform(-1.0, 1.0);
    else if (tier_ == "medium")
      a << rng_.uniform(-0.5, 0.5);
    else
      a << 0.3 + 0.05 * rng_.normal();
    return a;
  }

  if (spec_.name == "point-maze") {
    if (tier_ == "random") return rng_.uniform_vector(2, -1.0, 1.0);
    while (waypoint_ + 1 < waypoints_.size() &&
           (state - waypoints_[waypoint_]).norm() <= 0.3)
      ++waypoint_;
    const Vector pull = 3.0 * (waypoints_[waypoint_] - state);
    Vector a = speed_ * pull.cwiseMax(-1.0).cwiseMin(1.0);
    a += noise_ * rng_.normal_vector(2);
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }

  if (spec_.name == "push-slide") {
    if (tier_ == "random") return rng_.uniform_vector(2, -1.0, 1.0);
    Vector target(2);
    target << kPushTargetX, kPushTargetY;
    const Vector err = target - state.head(2);
    Vector a = tier_ == "medium" ? (0.6 * err + 0.3 * rng_.normal_vector(2)).eval()
                                 : (1.5 * err - 0.8 * state.tail(2) +
                                    0.02 * rng_.normal_vector(2))
                                       .eval();
    return a.cwiseMax(-1.0).cwiseMin(1.0);
  }

  throw std::invalid_argument("unknown environment: " + spec_.name);
}

ScoreScale measure_scores(const EnvSpec& spec, int episodes, std::uint64_t seed) {
  ScoreScale scale;
  for (const std::string tier : {"random", "expert"}) {
    RngStream env_rng(seed, rng_stream::kEnv);
    ScriptedController controller(spec, tier, seed);
    Real total = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
      Vector state = env_reset(spec, env_rng);
      controller.begin_episode(state);
      for (Index t = 0; t < spec.horizon; ++t) {
        const StepResult step = env_step(spec, state, controller.act(state));
        total += step.reward;
        state = step.next_state;
        if (step.done) break;
      }
    }
    (tier == "random" ? scale.random_score : scale.expert_score) =
        total / static_cast<Real>(episodes);
  }
  return scale;
}

ScoreScale score_scale(const EnvSpec& spec) {
  if (spec.name == "line-bandit") return {-0.092764158871438129, 0.1881988928910247};
  if (spec.name == "point-maze") return {0.0, 1.0};
  if (spec.name == "push-slide") return {-145.76915853893081, -19.604302729280558};
  throw std::invalid_argument("unknown environment: " + spec.name);
}

Real normalized_score(const ScoreScale& scale, Real raw) {
  if (!(scale.expert_score > scale.random_score))
    throw std::invalid_argument("score anchors must satisfy expert > random");
  return 100.0 * (raw - scale.random_score) / (scale.expert_score - scale.random_score);
}

}  // namespace scq::envs
