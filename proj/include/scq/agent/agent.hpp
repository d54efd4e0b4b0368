#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "scq/cvae/cvae.hpp"
#include "scq/envs/dataset.hpp"
#include "scq/envs/env.hpp"
#include "scq/nn/gaussian_policy.hpp"
#include "scq/nn/mlp.hpp"
#include "scq/nn/optim.hpp"
#include "scq/rng.hpp"
#include "scq/types.hpp"

namespace scq::agent {

enum class EntropyMode { kAuto, kFixed };
enum class CriticLossKind { kScq, kCql };

// Training configuration. Defaults follow the reference setup (400-wide
// twin critics, batch 256, Adam 3e-4, discount 0.99, target rate 5e-3,
// cosine actor schedule, automatic entropy tuning); experiments override
// the widths and batch for the small in-repo tasks.
struct ScqConfig {
  Real alpha = 1.0;               // OOD penalty weight on the critic
  Real beta = 0.0;                // behavior-cloning weight on the actor
  EntropyMode entropy_mode = EntropyMode::kAuto;
  Real fixed_lambda = 0.2;        // temperature in fixed mode, initial value in auto mode
  Real target_entropy = std::numeric_limits<Real>::quiet_NaN();  // NaN = -action_dim
  Real critic_lr = 3e-4;
  Real actor_lr = 3e-4;
  Real cvae_lr = 1e-3;
  Real lambda_lr = 3e-4;
  Index batch_size = 256;
  Real discount = 0.99;
  Real upsilon = 5e-3;
  Index ood_sample_budget = 10;
  Index warmup_iters = 5000;      // iterations with the penalty held at zero
  std::uint64_t seed = 1;
  Index actor_hidden = 400;
  Index critic_hidden = 400;
  Index n_hidden_layers = 2;
  Index cvae_hidden = 750;
  Real cvae_kl_weight = 0.02;
  Index total_iterations = 50000; // cosine schedule horizon
  bool cosine_actor_lr = true;
  bool penalize_fallback = false; // penalize rows whose rejection sampling failed
  bool ood_machinery = true;      // train the CVAE and sample OOD actions at all
  bool critic_layer_norm = false;
  CriticLossKind critic_loss_kind = CriticLossKind::kScq;
  Index delta_refresh_interval = 0;  // 0 = one nominal epoch (dataset size / batch)
};

void validate(const ScqConfig& config);

struct AgentState {
  ScqConfig config;
  Index state_dim = 0;
  Index action_dim = 0;
  Vector action_center;
  Vector action_half;

  nn::Mlp actor;
  nn::Mlp critic_a;
  nn::Mlp critic_b;
  nn::Mlp target_a;
  nn::Mlp target_b;
  nn::AdamState actor_opt;
  nn::AdamState critic_a_opt;
  nn::AdamState critic_b_opt;
  nn::LrSchedule actor_schedule;

  Real log_lambda = 0.0;
  nn::AdamState lambda_opt;

  cvae::CvaeModel cvae_model;
  nn::AdamState encoder_opt;
  nn::AdamState decoder_opt;
  cvae::OodThreshold threshold;         // classification delta, epoch-refreshed
  cvae::OodThreshold running_threshold; // within-epoch running mean, logging only

  std::int64_t iteration = 0;
  RngStream batch_rng{0, rng_stream::kBatch};
  RngStream actor_rng{0, rng_stream::kActor};
  RngStream cvae_rng{0, rng_stream::kCvae};
  RngStream ood_rng{0, rng_stream::kOod};
  RngStream target_rng{0, rng_stream::kTarget};

  Real lambda() const;
};

AgentState make_agent(const ScqConfig& config, Index state_dim, Index action_dim,
                      const Vector& action_low, const Vector& action_high);

// Dataset columns packed once for batch assembly.
struct DatasetTensors {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;
};

DatasetTensors dataset_tensors(const envs::Dataset& dataset);

struct BatchData {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;
};

// Uniform draw with replacement.
BatchData sample_batch(const DatasetTensors& data, Index batch_size, RngStream& rng);

// Policy actions in environment coordinates: center + half * tanh(u).
Matrix policy_actions(const AgentState& agent, const Matrix& squashed);

struct OodSampleResult {
  Matrix actions;            // environment coordinates
  std::vector<bool> found;   // row passed the OOD test within budget
  Vector distances;          // reconstruction distance of the returned action
};

// Up to `budget` batched draws from the actor per state; the first draw the
// CVAE flags as OOD wins, otherwise the maximum-distance draw is returned
// with found=false. Always consumes budget * batch normal draws.
OodSampleResult sample_ood_actions(const Matrix& states, const AgentState& agent,
                                   Index budget, RngStream& rng);

struct CriticLossResult {
  Real loss = 0.0;
  Real bellman = 0.0;
  Real penalty = 0.0;
  Real mean_q = 0.0;
  Real mean_abs_q = 0.0;
  Vector grads_a;
  Vector grads_b;
};

// Penalized twin-critic objective: alpha * mean over accepted rows of
// min(Q_A, Q_B)(s, a_ood) plus half the summed squared Bellman residuals
// against the frozen-target backup r + discount * (1 - done) *
// (min target Q(s', a') - lambda log pi(a'|s')). The penalty weight is
// zero while agent.iteration < warmup_iters. target_noise drives a'.
CriticLossResult critic_loss(const AgentState& agent, const BatchData& batch,
                             const OodSampleResult* ood, const Matrix& target_noise);

struct ActorLossResult {
  Real loss = 0.0;
  Real entropy_term = 0.0;
  Real q_term = 0.0;
  Real bc_term = 0.0;
  Real mean_log_prob = 0.0;
  Vector grads;
};

// Reparametrized objective: mean of lambda * log pi(a~|s) - min(Q_A, Q_B)
// (s, a~) + beta * |a~ - a_b|^2, with the critics held fixed.
ActorLossResult actor_loss(const AgentState& agent, const BatchData& batch,
                           const Matrix& actor_noise);

struct IterationMetrics {
  std::int64_t iteration = 0;
  Real critic_loss = 0.0;
  Real bellman = 0.0;
  Real penalty = 0.0;
  Real actor_loss = 0.0;
  Real mean_q = 0.0;
  Real mean_abs_q = 0.0;
  Real delta = 0.0;
  Real ood_acceptance = 0.0;
  Real lambda = 0.0;
  Real actor_lr = 0.0;
  Real cvae_loss = 0.0;
  std::uint64_t critic_checksum = 0;  // online critic params when the actor saw them
};

// Fixed order CSV header/row for the metrics stream.
std::string metrics_header();
std::string metrics_row(const IterationMetrics& metrics);

// One full update: CVAE step (with epoch delta refresh), OOD sampling,
// critic step, actor step with the scheduled learning rate plus the
// temperature update, then Polyak averaging of the targets.
IterationMetrics train_iteration(AgentState& agent, const DatasetTensors& data);

std::uint64_t params_checksum(const Vector& params);

// Fingerprint of both online critic parameter vectors, as recorded in the
// per-iteration metrics at the moment the actor loss reads them.
std::uint64_t critic_checksum(const AgentState& agent);

struct EvalResult {
  Real mean_return = 0.0;
  Vector episode_returns;
};

// Deterministic-policy rollouts (tanh of the actor mean).
EvalResult evaluate_policy(const AgentState& agent, const envs::EnvSpec& spec, int n_episodes,
                           std::uint64_t seed);

// Checkpoint with every parameter vector plus iteration, temperature,
// threshold state, network widths, and action bounds in the manifest.
std::string save_checkpoint(const AgentState& agent);
void load_checkpoint(AgentState& agent, std::string_view bytes);

// Rebuilds an agent from the manifest's architecture fields alone; training
// hyperparameters take their defaults, so the result is for rollouts and
// inspection, not for resuming a run bit-exactly.
AgentState agent_from_checkpoint(std::string_view bytes);

}  // namespace scq::agent
