#include "scq/agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "scq/agent/baselines.hpp"
#include "scq/nn/checkpoint.hpp"
#include "scq/util/io.hpp"

namespace scq::agent {

namespace {

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

void check_batch(const AgentState& agent, const BatchData& batch) {
  const Index b = batch.states.rows();
  if (b < 1 || batch.states.cols() != agent.state_dim ||
      batch.actions.rows() != b || batch.actions.cols() != agent.action_dim ||
      batch.rewards.size() != b || batch.next_states.rows() != b ||
      batch.next_states.cols() != agent.state_dim || batch.dones.size() != b) {
    throw std::invalid_argument("batch tensors do not match the agent dimensions");
  }
}

void check_noise(const AgentState& agent, const Matrix& noise, Index rows,
                 const char* what) {
  if (noise.rows() != rows || noise.cols() != agent.action_dim) {
    throw std::invalid_argument(std::string(what) + " noise must be (batch, action_dim)");
  }
}

// Shared Bellman half of both critic objectives: residuals of the twin
// critics against y = r + discount * (1 - done) * (min target Q(s', a')
// - lambda log pi(a'|s')), with a' reparametrized from target_noise.
struct BellmanForward {
  nn::MlpCache cache_a;
  nn::MlpCache cache_b;
  Vector qa;
  Vector qb;
  Vector y;
  Real loss = 0.0;
  Real mean_q = 0.0;
  Real mean_abs_q = 0.0;
};

BellmanForward bellman_forward(const AgentState& agent, const BatchData& batch,
                               const Matrix& target_noise) {
  const Index b = batch.states.rows();
  const Matrix head_next = nn::mlp_forward(agent.actor, batch.next_states);
  const nn::GaussianSample next = nn::sample_squashed(head_next, target_noise);
  const Matrix next_actions = policy_actions(agent, next.action);
  const Matrix x_next = concat_cols(batch.next_states, next_actions);
  const Vector qn_a = nn::mlp_forward(agent.target_a, x_next).col(0);
  const Vector qn_b = nn::mlp_forward(agent.target_b, x_next).col(0);
  const Vector q_next = qn_a.cwiseMin(qn_b);

  BellmanForward fwd;
  const Real lambda = agent.lambda();
  fwd.y = batch.rewards.array() +
          agent.config.discount * (1.0 - batch.dones.array()) *
              (q_next.array() - lambda * next.log_prob.array());

  const Matrix x_data = concat_cols(batch.states, batch.actions);
  fwd.qa = nn::mlp_forward(agent.critic_a, x_data, &fwd.cache_a).col(0);
  fwd.qb = nn::mlp_forward(agent.critic_b, x_data, &fwd.cache_b).col(0);
  fwd.loss = ((fwd.qa - fwd.y).squaredNorm() + (fwd.qb - fwd.y).squaredNorm()) /
             (2.0 * static_cast<Real>(b));
  fwd.mean_q = fwd.qa.cwiseMin(fwd.qb).mean();
  fwd.mean_abs_q = 0.5 * (fwd.qa.cwiseAbs().mean() + fwd.qb.cwiseAbs().mean());
  return fwd;
}

}  // namespace

void validate(const ScqConfig& config) {
  if (config.alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
  if (config.beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
  if (config.entropy_mode == EntropyMode::kAuto) {
    if (config.fixed_lambda <= 0.0) {
      throw std::invalid_argument("initial temperature must be positive in auto mode");
    }
  } else if (config.fixed_lambda < 0.0) {
    throw std::invalid_argument("fixed_lambda must be nonnegative");
  }
  if (!std::isnan(config.target_entropy) && !std::isfinite(config.target_entropy)) {
    throw std::invalid_argument("target_entropy must be finite when set");
  }
  if (config.critic_lr <= 0.0 || config.actor_lr <= 0.0 || config.cvae_lr <= 0.0 ||
      config.lambda_lr <= 0.0) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (config.discount < 0.0 || config.discount >= 1.0) {
    throw std::invalid_argument("discount must lie in [0, 1)");
  }
  if (config.upsilon < 0.0 || config.upsilon > 1.0) {
    throw std::invalid_argument("upsilon must lie in [0, 1]");
  }
  if (config.ood_sample_budget < 1) {
    throw std::invalid_argument("ood_sample_budget must be positive");
  }
  if (config.warmup_iters < 0) throw std::invalid_argument("warmup_iters must be nonnegative");
  if (config.actor_hidden < 1 || config.critic_hidden < 1 || config.cvae_hidden < 1) {
    throw std::invalid_argument("hidden widths must be positive");
  }
  if (config.n_hidden_layers < 1) {
    throw std::invalid_argument("n_hidden_layers must be positive");
  }
  if (config.cvae_kl_weight < 0.0) {
    throw std::invalid_argument("cvae_kl_weight must be nonnegative");
  }
  if (config.total_iterations < 1) {
    throw std::invalid_argument("total_iterations must be positive");
  }
  if (config.delta_refresh_interval < 0) {
    throw std::invalid_argument("delta_refresh_interval must be nonnegative");
  }
}

Real AgentState::lambda() const {
  if (config.entropy_mode == EntropyMode::kFixed) return config.fixed_lambda;
  return std::exp(log_lambda);
}

AgentState make_agent(const ScqConfig& config, Index state_dim, Index action_dim,
                      const Vector& action_low, const Vector& action_high) {
  validate(config);
  if (state_dim < 1 || action_dim < 1) {
    throw std::invalid_argument("agent dimensions must be positive");
  }
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw std::invalid_argument("action bounds must match the action width");
  }
  if (!((action_high - action_low).array() > 0.0).all()) {
    throw std::invalid_argument("action bounds must satisfy low < high");
  }

  AgentState agent;
  agent.config = config;
  agent.state_dim = state_dim;
  agent.action_dim = action_dim;
  agent.action_center = 0.5 * (action_low + action_high);
  agent.action_half = 0.5 * (action_high - action_low);

  RngStream init_rng(config.seed, rng_stream::kInit);
  const std::vector<Index> hidden_actor(config.n_hidden_layers, config.actor_hidden);
  const std::vector<Index> hidden_critic(config.n_hidden_layers, config.critic_hidden);
  const nn::MlpShape actor_shape{state_dim, hidden_actor, 2 * action_dim, false};
  const nn::MlpShape critic_shape{state_dim + action_dim, hidden_critic, 1,
                                  config.critic_layer_norm};
  agent.actor = nn::make_mlp(actor_shape, init_rng);
  agent.critic_a = nn::make_mlp(critic_shape, init_rng);
  agent.critic_b = nn::make_mlp(critic_shape, init_rng);
  agent.target_a = agent.critic_a;
  agent.target_b = agent.critic_b;
  agent.cvae_model =
      cvae::make_cvae(state_dim, action_dim, config.cvae_hidden, action_low, action_high,
                      init_rng);

  agent.actor_opt = nn::make_adam(agent.actor.params.size(), config.actor_lr);
  agent.critic_a_opt = nn::make_adam(agent.critic_a.params.size(), config.critic_lr);
  agent.critic_b_opt = nn::make_adam(agent.critic_b.params.size(), config.critic_lr);
  agent.lambda_opt = nn::make_adam(1, config.lambda_lr);
  agent.encoder_opt = nn::make_adam(agent.cvae_model.encoder.params.size(), config.cvae_lr);
  agent.decoder_opt = nn::make_adam(agent.cvae_model.decoder.params.size(), config.cvae_lr);
  agent.actor_schedule =
      nn::LrSchedule{config.cosine_actor_lr ? nn::LrSchedule::Kind::kCosine
                                            : nn::LrSchedule::Kind::kConstant,
                     config.actor_lr, config.total_iterations};
  agent.log_lambda =
      config.entropy_mode == EntropyMode::kAuto ? std::log(config.fixed_lambda) : 0.0;

  agent.batch_rng = RngStream(config.seed, rng_stream::kBatch);
  agent.actor_rng = RngStream(config.seed, rng_stream::kActor);
  agent.cvae_rng = RngStream(config.seed, rng_stream::kCvae);
  agent.ood_rng = RngStream(config.seed, rng_stream::kOod);
  agent.target_rng = RngStream(config.seed, rng_stream::kTarget);
  return agent;
}

DatasetTensors dataset_tensors(const envs::Dataset& dataset) {
  return DatasetTensors{envs::states_matrix(dataset), envs::actions_matrix(dataset),
                        envs::rewards_vector(dataset), envs::next_states_matrix(dataset),
                        envs::dones_vector(dataset)};
}

BatchData sample_batch(const DatasetTensors& data, Index batch_size, RngStream& rng) {
  const Index n = data.states.rows();
  if (n < 1) throw std::invalid_argument("cannot sample from an empty dataset");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");

  BatchData batch;
  batch.states.resize(batch_size, data.states.cols());
  batch.actions.resize(batch_size, data.actions.cols());
  batch.rewards.resize(batch_size);
  batch.next_states.resize(batch_size, data.next_states.cols());
  batch.dones.resize(batch_size);
  for (Index i = 0; i < batch_size; ++i) {
    const Index row = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
    batch.states.row(i) = data.states.row(row);
    batch.actions.row(i) = data.actions.row(row);
    batch.rewards[i] = data.rewards[row];
    batch.next_states.row(i) = data.next_states.row(row);
    batch.dones[i] = data.dones[row];
  }
  return batch;
}

Matrix policy_actions(const AgentState& agent, const Matrix& squashed) {
  if (squashed.cols() != agent.action_dim) {
    throw std::invalid_argument("squashed actions must have action_dim columns");
  }
  Matrix out = squashed;
  out.array().rowwise() *= agent.action_half.transpose().array();
  out.array().rowwise() += agent.action_center.transpose().array();
  return out;
}

OodSampleResult sample_ood_actions(const Matrix& states, const AgentState& agent,
                                   Index budget, RngStream& rng) {
  if (states.cols() != agent.state_dim) {
    throw std::invalid_argument("states must have state_dim columns");
  }
  if (budget < 1) throw std::invalid_argument("ood sample budget must be positive");

  const Index b = states.rows();
  const Matrix head = nn::mlp_forward(agent.actor, states);

  OodSampleResult result;
  result.actions = Matrix::Zero(b, agent.action_dim);
  result.found.assign(static_cast<std::size_t>(b), false);
  result.distances = Vector::Zero(b);
  Matrix best_actions = Matrix::Zero(b, agent.action_dim);
  Vector best_distances = Vector::Constant(b, -1.0);

  for (Index draw = 0; draw < budget; ++draw) {
    const Matrix noise = rng.normal_matrix(b, agent.action_dim);
    const nn::GaussianSample sample = nn::sample_squashed(head, noise);
    const Matrix actions = policy_actions(agent, sample.action);
    const Vector dist = cvae::reconstruction_distance(agent.cvae_model, states, actions);
    for (Index i = 0; i < b; ++i) {
      if (!result.found[static_cast<std::size_t>(i)] &&
          cvae::is_ood(dist[i], agent.threshold)) {
        result.found[static_cast<std::size_t>(i)] = true;
        result.actions.row(i) = actions.row(i);
        result.distances[i] = dist[i];
      }
      if (dist[i] > best_distances[i]) {
        best_distances[i] = dist[i];
        best_actions.row(i) = actions.row(i);
      }
    }
  }
  for (Index i = 0; i < b; ++i) {
    if (!result.found[static_cast<std::size_t>(i)]) {
      result.actions.row(i) = best_actions.row(i);
      result.distances[i] = best_distances[i];
    }
  }
  return result;
}

CriticLossResult critic_loss(const AgentState& agent, const BatchData& batch,
                             const OodSampleResult* ood, const Matrix& target_noise) {
  check_batch(agent, batch);
  const Index b = batch.states.rows();
  check_noise(agent, target_noise, b, "target");

  BellmanForward fwd = bellman_forward(agent, batch, target_noise);

  CriticLossResult result;
  result.bellman = fwd.loss;
  result.mean_q = fwd.mean_q;
  result.mean_abs_q = fwd.mean_abs_q;

  const Vector seed_a = (fwd.qa - fwd.y) / static_cast<Real>(b);
  const Vector seed_b = (fwd.qb - fwd.y) / static_cast<Real>(b);
  result.grads_a = nn::mlp_backward(agent.critic_a, fwd.cache_a, seed_a).params;
  result.grads_b = nn::mlp_backward(agent.critic_b, fwd.cache_b, seed_b).params;

  const bool penalized = ood != nullptr && agent.config.alpha > 0.0 &&
                         agent.iteration >= agent.config.warmup_iters;
  if (penalized) {
    if (ood->actions.rows() != b || ood->actions.cols() != agent.action_dim ||
        static_cast<Index>(ood->found.size()) != b) {
      throw std::invalid_argument("ood sample result does not match the batch");
    }
    Index n_selected = 0;
    for (Index i = 0; i < b; ++i) {
      if (agent.config.penalize_fallback || ood->found[static_cast<std::size_t>(i)]) {
        ++n_selected;
      }
    }
    if (n_selected > 0) {
      nn::MlpCache cache_pa;
      nn::MlpCache cache_pb;
      const Matrix x_ood = concat_cols(batch.states, ood->actions);
      const Vector pa = nn::mlp_forward(agent.critic_a, x_ood, &cache_pa).col(0);
      const Vector pb = nn::mlp_forward(agent.critic_b, x_ood, &cache_pb).col(0);
      const Real weight = agent.config.alpha / static_cast<Real>(n_selected);
      Vector pen_seed_a = Vector::Zero(b);
      Vector pen_seed_b = Vector::Zero(b);
      Real penalty_sum = 0.0;
      for (Index i = 0; i < b; ++i) {
        if (!agent.config.penalize_fallback && !ood->found[static_cast<std::size_t>(i)]) {
          continue;
        }
        penalty_sum += std::min(pa[i], pb[i]);
        if (pa[i] <= pb[i]) {
          pen_seed_a[i] = weight;
        } else {
          pen_seed_b[i] = weight;
        }
      }
      result.penalty = weight * penalty_sum;
      result.grads_a += nn::mlp_backward(agent.critic_a, cache_pa, pen_seed_a).params;
      result.grads_b += nn::mlp_backward(agent.critic_b, cache_pb, pen_seed_b).params;
    }
  }
  result.loss = result.bellman + result.penalty;
  return result;
}

CriticLossResult cql_critic_loss(const AgentState& agent, const BatchData& batch,
                                 const Matrix& target_noise, const Matrix& policy_noise) {
  check_batch(agent, batch);
  const Index b = batch.states.rows();
  check_noise(agent, target_noise, b, "target");
  check_noise(agent, policy_noise, b, "policy");

  BellmanForward fwd = bellman_forward(agent, batch, target_noise);

  CriticLossResult result;
  result.bellman = fwd.loss;
  result.mean_q = fwd.mean_q;
  result.mean_abs_q = fwd.mean_abs_q;

  const Real alpha =
      agent.iteration >= agent.config.warmup_iters ? agent.config.alpha : 0.0;
  const Real half_weight = alpha / (2.0 * static_cast<Real>(b));
  Vector seed_a = (fwd.qa - fwd.y) / static_cast<Real>(b);
  Vector seed_b = (fwd.qb - fwd.y) / static_cast<Real>(b);
  seed_a.array() -= half_weight;
  seed_b.array() -= half_weight;
  result.grads_a = nn::mlp_backward(agent.critic_a, fwd.cache_a, seed_a).params;
  result.grads_b = nn::mlp_backward(agent.critic_b, fwd.cache_b, seed_b).params;

  const Matrix head = nn::mlp_forward(agent.actor, batch.states);
  const nn::GaussianSample sample = nn::sample_squashed(head, policy_noise);
  const Matrix policy_acts = policy_actions(agent, sample.action);
  const Matrix x_policy = concat_cols(batch.states, policy_acts);
  nn::MlpCache cache_pa;
  nn::MlpCache cache_pb;
  const Vector pa = nn::mlp_forward(agent.critic_a, x_policy, &cache_pa).col(0);
  const Vector pb = nn::mlp_forward(agent.critic_b, x_policy, &cache_pb).col(0);

  result.penalty = alpha * (0.5 * (pa.mean() + pb.mean()) -
                            0.5 * (fwd.qa.mean() + fwd.qb.mean()));
  const Vector pen_seed = Vector::Constant(b, half_weight);
  result.grads_a += nn::mlp_backward(agent.critic_a, cache_pa, pen_seed).params;
  result.grads_b += nn::mlp_backward(agent.critic_b, cache_pb, pen_seed).params;

  result.loss = result.bellman + result.penalty;
  return result;
}

ActorLossResult actor_loss(const AgentState& agent, const BatchData& batch,
                           const Matrix& actor_noise) {
  check_batch(agent, batch);
  const Index b = batch.states.rows();
  check_noise(agent, actor_noise, b, "actor");

  nn::MlpCache head_cache;
  const Matrix head = nn::mlp_forward(agent.actor, batch.states, &head_cache);
  const nn::GaussianSample sample = nn::sample_squashed(head, actor_noise);
  const Matrix actions = policy_actions(agent, sample.action);

  const Matrix x = concat_cols(batch.states, actions);
  nn::MlpCache cache_a;
  nn::MlpCache cache_b;
  const Vector qa = nn::mlp_forward(agent.critic_a, x, &cache_a).col(0);
  const Vector qb = nn::mlp_forward(agent.critic_b, x, &cache_b).col(0);

  const Real lambda = agent.lambda();
  const Real inv_b = 1.0 / static_cast<Real>(b);
  const Matrix bc_residual = actions - batch.actions;

  ActorLossResult result;
  result.mean_log_prob = sample.log_prob.mean();
  result.entropy_term = lambda * result.mean_log_prob;
  result.q_term = -qa.cwiseMin(qb).mean();
  result.bc_term = agent.config.beta * bc_residual.rowwise().squaredNorm().mean();
  result.loss = result.entropy_term + result.q_term + result.bc_term;

  Vector q_seed_a = Vector::Zero(b);
  Vector q_seed_b = Vector::Zero(b);
  for (Index i = 0; i < b; ++i) {
    if (qa[i] <= qb[i]) {
      q_seed_a[i] = -inv_b;
    } else {
      q_seed_b[i] = -inv_b;
    }
  }
  const nn::MlpGrads back_a = nn::mlp_backward(agent.critic_a, cache_a, q_seed_a);
  const nn::MlpGrads back_b = nn::mlp_backward(agent.critic_b, cache_b, q_seed_b);

  Matrix d_actions = back_a.input.rightCols(agent.action_dim) +
                     back_b.input.rightCols(agent.action_dim);
  d_actions += (2.0 * agent.config.beta * inv_b) * bc_residual;
  Matrix d_squashed = d_actions;
  d_squashed.array().rowwise() *= agent.action_half.transpose().array();

  const Vector d_log_prob = Vector::Constant(b, lambda * inv_b);
  const Matrix d_head =
      nn::squashed_backward(sample, head, actor_noise, d_squashed, d_log_prob);
  result.grads = nn::mlp_backward(agent.actor, head_cache, d_head).params;
  return result;
}

std::string metrics_header() {
  return "iteration,critic_loss,bellman,penalty,actor_loss,mean_q,mean_abs_q,delta,"
         "ood_acceptance,lambda,actor_lr,cvae_loss,critic_checksum";
}

std::string metrics_row(const IterationMetrics& m) {
  std::string row = std::to_string(m.iteration);
  for (const Real v : {m.critic_loss, m.bellman, m.penalty, m.actor_loss, m.mean_q,
                       m.mean_abs_q, m.delta, m.ood_acceptance, m.lambda, m.actor_lr,
                       m.cvae_loss}) {
    row += ',';
    row += format_double(v);
  }
  row += ',';
  row += hex64(m.critic_checksum);
  return row;
}

std::uint64_t params_checksum(const Vector& params) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(params.data()),
                                  static_cast<std::size_t>(params.size()) * sizeof(Real)));
}

std::uint64_t critic_checksum(const AgentState& agent) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(agent.critic_a.params.size() +
                                         agent.critic_b.params.size()) *
                sizeof(Real));
  bytes.append(reinterpret_cast<const char*>(agent.critic_a.params.data()),
               static_cast<std::size_t>(agent.critic_a.params.size()) * sizeof(Real));
  bytes.append(reinterpret_cast<const char*>(agent.critic_b.params.data()),
               static_cast<std::size_t>(agent.critic_b.params.size()) * sizeof(Real));
  return fnv1a64(bytes);
}

IterationMetrics train_iteration(AgentState& agent, const DatasetTensors& data) {
  const Index n = data.states.rows();
  if (n < 1) throw std::invalid_argument("cannot train on an empty dataset");
  const ScqConfig& config = agent.config;
  const Index batch_size = config.batch_size;

  IterationMetrics metrics;
  metrics.iteration = agent.iteration;

  BatchData batch = sample_batch(data, batch_size, agent.batch_rng);

  OodSampleResult ood;
  if (config.ood_machinery) {
    const Index epoch_len = config.delta_refresh_interval > 0
                                ? config.delta_refresh_interval
                                : std::max<Index>(1, (n + batch_size - 1) / batch_size);
    if (agent.iteration % epoch_len == 0) {
      agent.threshold = cvae::measure_delta(agent.cvae_model, data.states, data.actions);
      agent.running_threshold = cvae::OodThreshold{};
    }

    const Matrix latent_noise =
        agent.cvae_rng.normal_matrix(batch_size, agent.cvae_model.latent_dim);
    const cvae::ElboResult elbo =
        cvae::elbo_loss(agent.cvae_model, batch.states, batch.actions, latent_noise,
                        config.cvae_kl_weight);
    nn::adam_step(agent.encoder_opt, agent.cvae_model.encoder.params, elbo.encoder_grads);
    nn::adam_step(agent.decoder_opt, agent.cvae_model.decoder.params, elbo.decoder_grads);
    metrics.cvae_loss = elbo.loss;
    cvae::update_delta(
        agent.running_threshold,
        cvae::reconstruction_distance(agent.cvae_model, batch.states, batch.actions));

    ood = sample_ood_actions(batch.states, agent, config.ood_sample_budget, agent.ood_rng);
    Index n_found = 0;
    for (const bool f : ood.found) n_found += f ? 1 : 0;
    metrics.ood_acceptance = static_cast<Real>(n_found) / static_cast<Real>(batch_size);
  }
  metrics.delta = agent.threshold.delta;

  const Matrix target_noise = agent.target_rng.normal_matrix(batch_size, agent.action_dim);
  CriticLossResult critic;
  if (config.critic_loss_kind == CriticLossKind::kScq) {
    critic = critic_loss(agent, batch, config.ood_machinery ? &ood : nullptr, target_noise);
  } else {
    const Matrix policy_noise = agent.ood_rng.normal_matrix(batch_size, agent.action_dim);
    critic = cql_critic_loss(agent, batch, target_noise, policy_noise);
  }
  nn::adam_step(agent.critic_a_opt, agent.critic_a.params, critic.grads_a);
  nn::adam_step(agent.critic_b_opt, agent.critic_b.params, critic.grads_b);
  metrics.critic_loss = critic.loss;
  metrics.bellman = critic.bellman;
  metrics.penalty = critic.penalty;
  metrics.mean_q = critic.mean_q;
  metrics.mean_abs_q = critic.mean_abs_q;

  metrics.critic_checksum = critic_checksum(agent);

  const Matrix actor_noise = agent.actor_rng.normal_matrix(batch_size, agent.action_dim);
  const ActorLossResult actor = actor_loss(agent, batch, actor_noise);
  agent.actor_opt.lr = nn::lr_at(agent.actor_schedule, agent.iteration);
  nn::adam_step(agent.actor_opt, agent.actor.params, actor.grads);
  metrics.actor_loss = actor.loss;
  metrics.actor_lr = agent.actor_opt.lr;

  if (config.entropy_mode == EntropyMode::kAuto) {
    const Real target_entropy = std::isnan(config.target_entropy)
                                    ? -static_cast<Real>(agent.action_dim)
                                    : config.target_entropy;
    Vector param(1);
    param[0] = agent.log_lambda;
    Vector grad(1);
    grad[0] = agent.lambda() * (-actor.mean_log_prob - target_entropy);
    nn::adam_step(agent.lambda_opt, param, grad);
    agent.log_lambda = param[0];
  }
  metrics.lambda = agent.lambda();

  nn::polyak_update(agent.target_a.params, agent.critic_a.params, config.upsilon);
  nn::polyak_update(agent.target_b.params, agent.critic_b.params, config.upsilon);

  agent.iteration += 1;
  return metrics;
}

EvalResult evaluate_policy(const AgentState& agent, const envs::EnvSpec& spec,
                           int n_episodes, std::uint64_t seed) {
  if (spec.state_dim != agent.state_dim || spec.action_dim != agent.action_dim) {
    throw std::invalid_argument("environment dimensions do not match the agent");
  }
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be positive");

  RngStream env_rng(seed, rng_stream::kEval);
  EvalResult result;
  result.episode_returns.resize(n_episodes);
  for (int ep = 0; ep < n_episodes; ++ep) {
    Vector state = envs::env_reset(spec, env_rng);
    Real episode_return = 0.0;
    for (Index t = 0; t < spec.horizon; ++t) {
      const Matrix head = nn::mlp_forward(agent.actor, state.transpose());
      const Matrix squashed = nn::deterministic_action(head);
      const Vector action = policy_actions(agent, squashed).row(0).transpose();
      const envs::StepResult step = envs::env_step(spec, state, action);
      episode_return += step.reward;
      state = step.next_state;
      if (step.done) break;
    }
    result.episode_returns[ep] = episode_return;
  }
  result.mean_return = result.episode_returns.mean();
  return result;
}

std::string save_checkpoint(const AgentState& agent) {
  nlohmann::json manifest;
  manifest["kind"] = "scq-agent";
  manifest["iteration"] = agent.iteration;
  manifest["log_lambda"] = agent.log_lambda;
  manifest["delta"] = agent.threshold.delta;
  manifest["delta_count"] = agent.threshold.count;
  manifest["state_dim"] = agent.state_dim;
  manifest["action_dim"] = agent.action_dim;
  manifest["actor_hidden"] = agent.config.actor_hidden;
  manifest["critic_hidden"] = agent.config.critic_hidden;
  manifest["n_hidden_layers"] = agent.config.n_hidden_layers;
  manifest["cvae_hidden"] = agent.config.cvae_hidden;
  manifest["critic_layer_norm"] = agent.config.critic_layer_norm;
  const Vector low = agent.action_center - agent.action_half;
  const Vector high = agent.action_center + agent.action_half;
  manifest["action_low"] = std::vector<Real>(low.begin(), low.end());
  manifest["action_high"] = std::vector<Real>(high.begin(), high.end());
  const std::vector<nn::NamedTensor> tensors{
      {"actor", agent.actor.params},
      {"critic_a", agent.critic_a.params},
      {"critic_b", agent.critic_b.params},
      {"target_a", agent.target_a.params},
      {"target_b", agent.target_b.params},
      {"cvae_encoder", agent.cvae_model.encoder.params},
      {"cvae_decoder", agent.cvae_model.decoder.params},
  };
  return nn::encode_checkpoint(std::move(manifest), tensors);
}

void load_checkpoint(AgentState& agent, std::string_view bytes) {
  auto [manifest, tensors] = nn::decode_checkpoint(bytes);
  if (manifest.value("kind", "") != std::string("scq-agent")) {
    throw std::invalid_argument("checkpoint is not an agent checkpoint");
  }
  if (manifest.at("state_dim").get<Index>() != agent.state_dim ||
      manifest.at("action_dim").get<Index>() != agent.action_dim) {
    throw std::invalid_argument("checkpoint dimensions do not match the agent");
  }

  std::vector<std::pair<std::string, Vector*>> slots{
      {"actor", &agent.actor.params},
      {"critic_a", &agent.critic_a.params},
      {"critic_b", &agent.critic_b.params},
      {"target_a", &agent.target_a.params},
      {"target_b", &agent.target_b.params},
      {"cvae_encoder", &agent.cvae_model.encoder.params},
      {"cvae_decoder", &agent.cvae_model.decoder.params},
  };
  if (tensors.size() != slots.size()) {
    throw std::invalid_argument("checkpoint tensor list does not match an agent");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (tensors[i].name != slots[i].first) {
      throw std::invalid_argument("checkpoint tensor order does not match an agent");
    }
    if (tensors[i].values.size() != slots[i].second->size()) {
      throw std::invalid_argument("checkpoint tensor size does not match the agent");
    }
    *slots[i].second = tensors[i].values;
  }
  agent.iteration = manifest.at("iteration").get<std::int64_t>();
  agent.log_lambda = manifest.at("log_lambda").get<Real>();
  agent.threshold.delta = manifest.at("delta").get<Real>();
  agent.threshold.count = manifest.at("delta_count").get<std::int64_t>();
}

AgentState agent_from_checkpoint(std::string_view bytes) {
  auto [manifest, tensors] = nn::decode_checkpoint(bytes);
  if (manifest.value("kind", "") != std::string("scq-agent")) {
    throw std::invalid_argument("checkpoint is not an agent checkpoint");
  }
  ScqConfig config;
  config.actor_hidden = manifest.at("actor_hidden").get<Index>();
  config.critic_hidden = manifest.at("critic_hidden").get<Index>();
  config.n_hidden_layers = manifest.at("n_hidden_layers").get<Index>();
  config.cvae_hidden = manifest.at("cvae_hidden").get<Index>();
  config.critic_layer_norm = manifest.at("critic_layer_norm").get<bool>();
  const auto low_values = manifest.at("action_low").get<std::vector<Real>>();
  const auto high_values = manifest.at("action_high").get<std::vector<Real>>();
  const Vector low = Eigen::Map<const Vector>(low_values.data(), Index(low_values.size()));
  const Vector high = Eigen::Map<const Vector>(high_values.data(), Index(high_values.size()));
  AgentState agent = make_agent(config, manifest.at("state_dim").get<Index>(),
                                manifest.at("action_dim").get<Index>(), low, high);
  load_checkpoint(agent, bytes);
  return agent;
}

}  // namespace scq::agent
