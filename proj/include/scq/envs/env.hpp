#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scq/rng.hpp"
#include "scq/types.hpp"

namespace scq::envs {

enum class RewardKind { kDense, kSparse };

// Closed-form toy tasks:
//
//   line-bandit  One-step continuous bandit on [-1, 1]. The reward is a
//                mixture of four Gaussians bumps,
//                  r(a) =  0.20 exp(-((a - 0.30) / 0.20)^2)
//                        + 0.15 exp(-((a + 0.40) / 0.25)^2)
//                        - 0.80 exp(-((a - 0.85) / 0.10)^2)
//                        - 0.80 exp(-((a + 0.85) / 0.10)^2),
//                so the best in-support arm sits at a = 0.3 while the
//                regions near +-0.85 are penalty wells. Episodes start at
//                state 0, the next state records the action, done is
//                immediate.
//
//   point-maze   Point mass with velocity control in a 7 x 5 unit-cell
//                maze whose cells at columns 1..5, rows 0..2 are walls,
//                leaving a U corridor. Motion integrates x then y with
//                position += 0.3 * action per axis, clamping at wall
//                boundaries with a 1e-3 gap; per-step travel stays under
//                one cell, so each axis move crosses at most one boundary.
//                Sparse reward 1 (and done) within 0.5 of the goal at
//                (6.5, 0.5); episodes start near (0.5, 0.5).
//
//   push-slide   Damped puck regulation on the [-2, 2]^2 plane with force
//                control: v' = 0.9 v + 0.3 a, p' = p + 0.3 v', clamped to
//                the box (velocity zeroed on contact). Dense reward
//                -|p' - g| - 0.05 |a|^2 toward the target g = (1.2, -0.8).
//                State is (px, py, vx, vy); episodes start near
//                (-1.5, 1.5) at rest and never terminate early.
struct EnvSpec {
  std::string name;
  Index state_dim = 0;
  Index action_dim = 0;
  Vector action_low;
  Vector action_high;
  Index horizon = 1;
  RewardKind reward_kind = RewardKind::kDense;
};

// Builds the spec for one of the named tasks above.
EnvSpec make_env(std::string_view name);

struct StepResult {
  Vector next_state;
  Real reward;
  bool done;
};

// Deterministic dynamics; the action is clipped to the declared bounds
// before use. Non-finite inputs are rejected.
StepResult env_step(const EnvSpec& spec, const Vector& state, const Vector& action);

// Draws an initial state from the task's start distribution.
Vector env_reset(const EnvSpec& spec, RngStream& rng);

// Maze geometry, exposed so stored trajectories can be re-validated: a
// point is blocked when it lies outside the 7 x 5 field or inside a wall
// cell, and a step is clear when the axis-ordered path (x leg, then y leg)
// touches no blocked point. Assumes per-axis travel below one cell.
bool maze_blocked(Real x, Real y);
bool maze_move_clear(const Vector& from, const Vector& to);

// Scripted data-collection policies, one of {random, medium, expert}.
// Controllers hold per-episode state (waypoints, speed draws), so an
// instance serves one rollout stream at a time.
class ScriptedController {
 public:
  ScriptedController(EnvSpec spec, std::string tier, std::uint64_t seed,
                     std::uint64_t stream_salt = 0);

  void begin_episode(const Vector& start);
  Vector act(const Vector& state);

 private:
  EnvSpec spec_;
  std::string tier_;
  RngStream rng_;
  std::vector<Vector> waypoints_;
  std::size_t waypoint_ = 0;
  Real speed_ = 1.0;
  Real noise_ = 0.0;
};

struct ScoreScale {
  Real random_score = 0.0;
  Real expert_score = 1.0;
};

// Frozen per-task anchors (mean undiscounted return of the scripted random
// and expert controllers over 100 episodes, seed 100). A test re-measures
// them so drift in the dynamics or controllers is caught.
ScoreScale score_scale(const EnvSpec& spec);

ScoreScale measure_scores(const EnvSpec& spec, int episodes, std::uint64_t seed);

// 100 * (raw - random) / (expert - random).
Real normalized_score(const ScoreScale& scale, Real raw);

}  // namespace scq::envs
