// Release acceptance checks. Each check exercises one gate end to end and
// prints a single pass/fail line with the measured numbers; the process
// exit code is the number of failed checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "scq/agent/agent.hpp"
#include "scq/agent/baselines.hpp"
#include "scq/cvae/cvae.hpp"
#include "scq/envs/dataset.hpp"
#include "scq/envs/env.hpp"
#include "scq/harness/harness.hpp"
#include "scq/linear/ops.hpp"
#include "scq/linear/random_instance.hpp"
#include "scq/linear/verify.hpp"
#include "scq/nn/optim.hpp"
#include "scq/rng.hpp"
#include "scq/util/io.hpp"

namespace {

using namespace scq;
namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), spec, v);
  return buffer;
}

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// Small networks, a small batch, and a fixed low temperature: the settings
// every training-based check shares so the full suite stays within its
// budgets on one core.
agent::ScqConfig desk_agent() {
  agent::ScqConfig config;
  config.alpha = 0.1;
  config.entropy_mode = agent::EntropyMode::kFixed;
  config.fixed_lambda = 0.01;
  config.actor_hidden = 32;
  config.critic_hidden = 32;
  config.n_hidden_layers = 2;
  config.cvae_hidden = 32;
  config.batch_size = 64;
  config.warmup_iters = 1000;
  config.ood_sample_budget = 6;
  return config;
}

harness::ExperimentConfig desk_experiment(const std::string& env, const std::string& method,
                                          const std::string& output_dir,
                                          std::vector<std::uint64_t> seeds, Index iterations) {
  harness::ExperimentConfig config;
  config.env = env;
  config.method = method;
  config.agent = desk_agent();
  config.n_iterations = iterations;
  config.eval_every = 5000;
  config.metrics_every = 1000;
  config.seeds = std::move(seeds);
  config.output_dir = output_dir;
  return config;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> lines;
  for (const std::string& line : split(text, '\n'))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

// Value of one named column in the last row of a metrics stream.
Real final_metric(const fs::path& file, const std::string& column) {
  const std::vector<std::string> lines = nonempty_lines(read_file(file));
  if (lines.size() < 3) throw std::invalid_argument("metrics file has no rows");
  const std::vector<std::string> header = split(lines[1], ',');
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw std::invalid_argument("metrics column not found: " + column);
  const std::size_t index = static_cast<std::size_t>(it - header.begin());
  return std::stod(split(lines.back(), ',').at(index));
}

Real final_curve_value(const fs::path& file) {
  const std::vector<std::string> lines = nonempty_lines(read_file(file));
  if (lines.size() < 3) throw std::invalid_argument("curve file has no rows");
  return std::stod(split(lines.back(), ',').at(1));
}

Real seed_mean_abs_q(const harness::ExperimentConfig& config) {
  Real sum = 0.0;
  for (const std::uint64_t seed : config.seeds)
    sum += final_metric(fs::path(config.output_dir) /
                            ("seed" + std::to_string(seed) + "_metrics.csv"),
                        "mean_abs_q");
  return sum / static_cast<Real>(config.seeds.size());
}

// Largest absolute episode return in the dataset, episodes delimited by the
// stored done flags (a trailing unterminated episode still counts).
Real return_scale(const envs::Dataset& dataset) {
  Real scale = 0.0;
  Real episode = 0.0;
  for (const envs::Transition& t : dataset.transitions) {
    episode += t.reward;
    if (t.done) {
      scale = std::max(scale, std::abs(episode));
      episode = 0.0;
    }
  }
  scale = std::max(scale, std::abs(episode));
  return std::max(scale, Real(1e-9));
}

std::map<std::string, std::string> dir_bytes(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      files[entry.path().lexically_relative(root).string()] = read_file(entry.path());
  return files;
}

// Fixed-point iteration oracle for the exact policy Q, written with plain
// loops and scalar dot products only, sharing no code with the solver under
// test.
Vector value_iteration_oracle(const linear::LinearMdpSpec& spec, const Matrix& policy,
                              int iters) {
  const Index n = spec.n_pairs();
  std::vector<Real> q(static_cast<std::size_t>(n), 0.0);
  std::vector<Real> next(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < iters; ++it) {
    for (Index s = 0; s < spec.n_states; ++s) {
      for (Index a = 0; a < spec.n_actions; ++a) {
        const Index pair = s * spec.n_actions + a;
        Real reward = 0.0;
        for (Index i = 0; i < spec.feature_dim; ++i)
          reward += spec.features(pair, i) * spec.reward_weights[i];
        Real future = 0.0;
        for (Index sn = 0; sn < spec.n_states; ++sn) {
          Real prob = 0.0;
          for (Index i = 0; i < spec.feature_dim; ++i)
            prob += spec.features(pair, i) * spec.transition_measures(sn, i);
          if (prob < 0.0) prob = 0.0;
          Real value = 0.0;
          for (Index an = 0; an < spec.n_actions; ++an)
            value += policy(sn, an) * q[static_cast<std::size_t>(sn * spec.n_actions + an)];
          future += prob * value;
        }
        next[static_cast<std::size_t>(pair)] = reward + spec.discount * future;
      }
    }
    q = next;
  }
  return Eigen::Map<Vector>(q.data(), n);
}

// One-hot features over pairs, so the feature space represents every
// function exactly and the projected backup must equal the exact one.
linear::LinearMdpSpec one_hot_instance(Index n_states, Index n_actions, Real discount,
                                       std::uint64_t seed) {
  RngStream rng(seed, rng_stream::kInit);
  linear::LinearMdpSpec spec;
  spec.n_states = n_states;
  spec.n_actions = n_actions;
  spec.feature_dim = n_states * n_actions;
  spec.discount = discount;
  spec.features = Matrix::Identity(spec.n_pairs(), spec.n_pairs());
  Matrix transition(spec.n_pairs(), n_states);
  for (Index p = 0; p < spec.n_pairs(); ++p) {
    for (Index s = 0; s < n_states; ++s) transition(p, s) = rng.uniform(0.05, 1.0);
    transition.row(p) /= transition.row(p).sum();
  }
  spec.transition_measures = transition.transpose();
  spec.reward_weights = rng.uniform_vector(spec.n_pairs(), -1.0, 1.0);
  linear::validate(spec);
  return spec;
}

linear::DatasetDistribution uniform_distribution(const linear::LinearMdpSpec& spec) {
  linear::DatasetDistribution dist;
  dist.behavior_policy = Matrix::Constant(spec.n_states, spec.n_actions,
                                          1.0 / static_cast<Real>(spec.n_actions));
  dist.weights = Vector::Constant(spec.n_pairs(), 1.0 / static_cast<Real>(spec.n_pairs()));
  return dist;
}

// Central finite differences over one parameter vector against analytic
// gradients, reporting the worst relative error.
template <typename LossFn>
Real fd_gradient_error(Vector& params, const Vector& grads, LossFn loss) {
  const Real h = 1e-5;
  Real worst = 0.0;
  for (Index i = 0; i < params.size(); ++i) {
    const Real keep = params[i];
    params[i] = keep + h;
    const Real hi = loss();
    params[i] = keep - h;
    const Real lo = loss();
    params[i] = keep;
    const Real fd = (hi - lo) / (2.0 * h);
    const Real denom = std::max({Real(1), std::abs(fd), std::abs(grads[i])});
    worst = std::max(worst, std::abs(fd - grads[i]) / denom);
  }
  return worst;
}

agent::AgentState boxed_agent(const agent::ScqConfig& config, Index state_dim,
                              Index action_dim) {
  return agent::make_agent(config, state_dim, action_dim,
                           Vector::Constant(action_dim, -1.0),
                           Vector::Constant(action_dim, 1.0));
}

agent::BatchData random_batch(Index b, Index state_dim, Index action_dim, RngStream& rng) {
  agent::BatchData batch;
  batch.states = rng.normal_matrix(b, state_dim);
  batch.actions = 0.5 * rng.normal_matrix(b, action_dim);
  batch.rewards = rng.normal_vector(b);
  batch.next_states = rng.normal_matrix(b, state_dim);
  batch.dones.resize(b);
  for (Index i = 0; i < b; ++i) batch.dones[i] = static_cast<Real>(rng.index(2));
  return batch;
}

CheckResult check_pointwise_pessimism() {
  const harness::VerifySummary summary = harness::verify_linear(50, 0.5, 5, 11);
  const harness::TheoremTally& tally = summary.pointwise;
  CheckResult result;
  result.pass = tally.passed == 50 && tally.failed == 0 && tally.precondition_skips == 0;
  result.detail = "passed " + std::to_string(tally.passed) + "/50 instances, worst violation " +
                  fmt("%.2e", tally.worst_violation) + ", epsilon <= " +
                  fmt("%.2e", tally.max_epsilon_bound);
  return result;
}

CheckResult check_state_value_sandwich() {
  const harness::VerifySummary summary = harness::verify_linear(60, 0.5, 5, 11);
  const harness::TheoremTally& tally = summary.state_value;
  CheckResult result;
  result.pass = tally.passed >= 50 && tally.failed == 0;
  result.detail = "passed " + std::to_string(tally.passed) + " qualifying instances (" +
                  std::to_string(tally.precondition_skips) + " skipped), worst violation " +
                  fmt("%.2e", tally.worst_violation);
  return result;
}

CheckResult check_penalty_decomposition() {
  Real worst = 0.0;
  const linear::InstanceParams params;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t seed = 7000 + static_cast<std::uint64_t>(i);
    const linear::LinearMdpSpec spec = linear::random_instance(params, seed);
    const linear::DatasetDistribution dist = linear::random_behavior(spec, seed + 1);
    const linear::PolicyMatrix policy =
        linear::random_policy(params.n_states, params.n_actions, seed + 2);
    const linear::OodMask mask = linear::random_mask(params, seed + 3);
    const linear::FTerms terms = linear::compute_f_terms(spec, dist, policy, mask, 1e-10);
    worst = std::max(worst, (terms.f - terms.f_idd - terms.f_ood).lpNorm<Eigen::Infinity>());
  }
  CheckResult result;
  result.pass = worst <= 1e-10;
  result.detail = "100 policy/mask draws, worst decomposition gap " + fmt("%.2e", worst);
  return result;
}

CheckResult check_tabular_equivalence() {
  Real worst_backup = 0.0;
  Real worst_fixed_point = 0.0;
  for (std::uint64_t seed = 21; seed <= 25; ++seed) {
    const linear::LinearMdpSpec spec = one_hot_instance(3, 3, 0.9, seed);
    const linear::DatasetDistribution dist = uniform_distribution(spec);
    const linear::PolicyMatrix policy = linear::random_policy(3, 3, seed + 100);
    RngStream rng(seed + 200);
    const Vector q_prev = rng.uniform_vector(spec.n_pairs(), -2.0, 2.0);

    const Vector fitted = spec.features * linear::lstdq_update(spec, dist, policy, q_prev, 0.0).w;
    const Vector exact = linear::bellman_backup(spec, policy, q_prev);
    worst_backup = std::max(worst_backup, (fitted - exact).lpNorm<Eigen::Infinity>());

    const Vector solved = linear::true_q(spec, policy);
    const Vector iterated = value_iteration_oracle(spec, policy.probs, 10000);
    worst_fixed_point =
        std::max(worst_fixed_point, (solved - iterated).lpNorm<Eigen::Infinity>());
  }
  CheckResult result;
  result.pass = worst_backup <= 1e-10 && worst_fixed_point <= 1e-10;
  result.detail = "one-hot backup gap " + fmt("%.2e", worst_backup) +
                  ", fixed point vs 10k-step iteration " + fmt("%.2e", worst_fixed_point);
  return result;
}

CheckResult check_gradient_suite() {
  Real worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    agent::ScqConfig config;
    config.seed = seed;
    config.alpha = 0.5;
    config.warmup_iters = 0;
    config.actor_hidden = 8;
    config.critic_hidden = 8;
    config.cvae_hidden = 8;
    config.entropy_mode = agent::EntropyMode::kFixed;
    config.fixed_lambda = 0.3;
    config.beta = seed % 2 == 0 ? 0.0 : 0.7;

    agent::AgentState penalized = boxed_agent(config, 2, 2);
    RngStream rng(seed * 17 + 1);
    const agent::BatchData batch = random_batch(16, 2, 2, rng);
    const Matrix target_noise = rng.normal_matrix(16, 2);

    agent::OodSampleResult ood;
    ood.actions = 0.8 * rng.normal_matrix(16, 2);
    ood.found.assign(16, false);
    for (std::size_t i = 0; i < 16; i += 2) ood.found[i] = true;
    ood.distances = Vector::Ones(16);

    const agent::CriticLossResult critic_base =
        agent::critic_loss(penalized, batch, &ood, target_noise);
    const auto critic_eval = [&]() {
      return agent::critic_loss(penalized, batch, &ood, target_noise).loss;
    };
    worst = std::max(worst,
                     fd_gradient_error(penalized.critic_a.params, critic_base.grads_a, critic_eval));
    worst = std::max(worst,
                     fd_gradient_error(penalized.critic_b.params, critic_base.grads_b, critic_eval));

    agent::AgentState uniform = boxed_agent(config, 2, 2);
    const Matrix policy_noise = rng.normal_matrix(16, 2);
    const agent::CriticLossResult cql_base =
        agent::cql_critic_loss(uniform, batch, target_noise, policy_noise);
    const auto cql_eval = [&]() {
      return agent::cql_critic_loss(uniform, batch, target_noise, policy_noise).loss;
    };
    worst = std::max(worst, fd_gradient_error(uniform.critic_a.params, cql_base.grads_a, cql_eval));
    worst = std::max(worst, fd_gradient_error(uniform.critic_b.params, cql_base.grads_b, cql_eval));

    agent::AgentState actor_agent = boxed_agent(config, 2, 2);
    const Matrix actor_noise = rng.normal_matrix(16, 2);
    const agent::ActorLossResult actor_base = agent::actor_loss(actor_agent, batch, actor_noise);
    const auto actor_eval = [&]() {
      return agent::actor_loss(actor_agent, batch, actor_noise).loss;
    };
    worst = std::max(worst,
                     fd_gradient_error(actor_agent.actor.params, actor_base.grads, actor_eval));

    RngStream init(seed, rng_stream::kInit);
    cvae::CvaeModel model = cvae::make_cvae(2, 2, 8, Vector::Constant(2, -1.0),
                                            Vector::Constant(2, 1.0), init);
    RngStream refill(seed + 1, rng_stream::kInit);
    model.decoder = nn::make_mlp(model.decoder.shape, refill);
    RngStream probe(seed + 50, rng_stream::kBatch);
    const Matrix states = probe.normal_matrix(3, 2);
    const Matrix actions = probe.normal_matrix(3, 2).array().tanh().matrix();
    const Matrix noise = probe.normal_matrix(3, model.latent_dim);
    const cvae::ElboResult elbo_base = cvae::elbo_loss(model, states, actions, noise, 0.5);
    const auto elbo_eval = [&]() {
      return cvae::elbo_loss(model, states, actions, noise, 0.5).loss;
    };
    worst = std::max(worst,
                     fd_gradient_error(model.encoder.params, elbo_base.encoder_grads, elbo_eval));
    worst = std::max(worst,
                     fd_gradient_error(model.decoder.params, elbo_base.decoder_grads, elbo_eval));
  }
  CheckResult result;
  result.pass = worst < 1e-4;
  result.detail = "10 seeds x {penalized critic, uniform-penalty critic, actor, elbo}, "
                  "worst relative error " +
                  fmt("%.2e", worst);
  return result;
}

CheckResult check_ood_calibration() {
  int flagged_far = 0;
  int accepted_near = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream data_rng(seed, rng_stream::kEnv);
    const Index n = 4000;
    const Matrix states = Matrix::Zero(n, 1);
    Matrix actions(n, 1);
    for (Index i = 0; i < n; ++i) actions(i, 0) = data_rng.uniform(-0.5, 0.5);

    RngStream init(seed, rng_stream::kInit);
    cvae::CvaeModel model = cvae::make_cvae(1, 1, 32, Vector::Constant(1, -1.0),
                                            Vector::Constant(1, 1.0), init);
    nn::AdamState encoder_opt = nn::make_adam(model.encoder.shape.n_params(), 1e-3);
    nn::AdamState decoder_opt = nn::make_adam(model.decoder.shape.n_params(), 1e-3);
    RngStream rng(seed, rng_stream::kCvae);
    const Index batch = 64;
    Matrix batch_states(batch, 1);
    Matrix batch_actions(batch, 1);
    for (int step = 0; step < 3000; ++step) {
      for (Index i = 0; i < batch; ++i) {
        const Index row = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
        batch_states.row(i) = states.row(row);
        batch_actions.row(i) = actions.row(row);
      }
      const Matrix noise = rng.normal_matrix(batch, model.latent_dim);
      const cvae::ElboResult elbo = cvae::elbo_loss(model, batch_states, batch_actions, noise,
                                                    0.02);
      nn::adam_step(encoder_opt, model.encoder.params, elbo.encoder_grads);
      nn::adam_step(decoder_opt, model.decoder.params, elbo.decoder_grads);
    }

    const cvae::OodThreshold threshold = cvae::measure_delta(model, states, actions);
    const Vector state = Vector::Zero(1);
    if (cvae::is_ood(model, threshold, state, Vector::Constant(1, 0.95))) ++flagged_far;
    if (!cvae::is_ood(model, threshold, state, Vector::Constant(1, 0.1))) ++accepted_near;
  }
  CheckResult result;
  result.pass = flagged_far >= 19 && accepted_near >= 18;
  result.detail = "probe 0.95 flagged out-of-distribution in " + std::to_string(flagged_far) +
                  "/20 seeds, probe 0.1 accepted in " + std::to_string(accepted_near) + "/20";
  return result;
}

CheckResult check_ablation_ordering() {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  struct TaskOutcome {
    Real scq_score = 0.0;
    Real sac_score = 0.0;
    Real scq_abs_q = 0.0;
    Real sac_abs_q = 0.0;
    Real scale = 0.0;
  };
  std::map<std::string, TaskOutcome> outcomes;
  for (const std::string env : {"line-bandit", "point-maze"}) {
    TaskOutcome outcome;
    for (const std::string method : {"scq", "sac_alpha0"}) {
      const harness::ExperimentConfig config = desk_experiment(
          env, method, "acceptance/ablation/" + env + "_" + method, seeds, 50000);
      const harness::ResultTable table = harness::run_experiment(config);
      const Real score = table.rows.at(0).mean_score;
      const Real abs_q = seed_mean_abs_q(config);
      if (method == "scq") {
        outcome.scq_score = score;
        outcome.scq_abs_q = abs_q;
      } else {
        outcome.sac_score = score;
        outcome.sac_abs_q = abs_q;
      }
      outcome.scale = return_scale(harness::load_or_generate_dataset(config));
    }
    outcomes[env] = outcome;
  }

  bool scores_ordered = true;
  bool sac_blows_up = false;
  bool scq_bounded = true;
  std::string detail;
  for (const auto& [env, outcome] : outcomes) {
    scores_ordered = scores_ordered && outcome.scq_score > outcome.sac_score;
    sac_blows_up = sac_blows_up || outcome.sac_abs_q > 10.0 * outcome.scale;
    scq_bounded = scq_bounded && outcome.scq_abs_q <= 10.0 * outcome.scale;
    if (!detail.empty()) detail += "; ";
    detail += env + " score " + fmt("%.1f", outcome.scq_score) + " vs " +
              fmt("%.1f", outcome.sac_score) + ", |Q| " + fmt("%.3g", outcome.scq_abs_q) +
              " vs " + fmt("%.3g", outcome.sac_abs_q) + " (10x scale " +
              fmt("%.3g", 10.0 * outcome.scale) + ")";
  }
  CheckResult result;
  result.pass = scores_ordered && sac_blows_up && scq_bounded;
  result.detail = detail;
  return result;
}

CheckResult check_alpha_monotonicity() {
  const std::vector<Real> alphas{0.1, 1.0, 10.0};
  const harness::ExperimentConfig config =
      desk_experiment("line-bandit", "scq", "acceptance/alpha_sweep", {1, 2, 3}, 50000);
  harness::run_alpha_sweep(config, alphas);

  std::vector<Real> final_q;
  for (const Real alpha : alphas)
    final_q.push_back(final_curve_value(fs::path(config.output_dir) /
                                        ("alpha_" + format_double(alpha)) / "mean_q_curve.csv"));
  CheckResult result;
  result.pass = final_q[0] >= final_q[1] && final_q[1] >= final_q[2];
  result.detail = "final mean Q " + fmt("%.4f", final_q[0]) + " / " + fmt("%.4f", final_q[1]) +
                  " / " + fmt("%.4f", final_q[2]) + " at alpha 0.1 / 1 / 10";
  return result;
}

CheckResult check_small_data_robustness() {
  const std::vector<Real> fractions{1.0, 0.5, 0.3, 0.1};
  const harness::ExperimentConfig config = desk_experiment(
      "point-maze", "scq", "acceptance/fraction_study", {1, 2, 3, 4, 5}, 50000);
  const harness::ResultTable table = harness::run_fraction_study(config, fractions);

  std::map<std::string, std::map<std::string, Real>> by_task;
  for (const harness::ResultRow& row : table.rows) by_task[row.task][row.method] = row.mean_score;

  int wins = 0;
  std::string detail;
  for (const auto& [task, scores] : by_task) {
    const Real scq = scores.at("scq");
    const Real layer_norm = scores.at("scq_layernorm");
    if (scq >= layer_norm) ++wins;
    if (!detail.empty()) detail += ", ";
    detail += task + " " + fmt("%.1f", scq) + " vs " + fmt("%.1f", layer_norm);
  }
  CheckResult result;
  result.pass = wins >= 3;
  result.detail = "wins " + std::to_string(wins) + "/4 fractions (" + detail + ")";
  return result;
}

CheckResult check_rerun_determinism() {
  harness::ExperimentConfig config =
      desk_experiment("line-bandit", "scq", "acceptance/determinism", {1, 2}, 5000);
  config.eval_every = 1000;
  config.metrics_every = 500;

  harness::run_experiment(config);
  const std::map<std::string, std::string> first = dir_bytes(config.output_dir);
  fs::remove_all(config.output_dir);
  harness::run_experiment(config);
  const bool train_identical = dir_bytes(config.output_dir) == first;

  const std::string verify_first = harness::verify_summary_json(harness::verify_linear(10, 0.5, 3, 7));
  const std::string verify_second =
      harness::verify_summary_json(harness::verify_linear(10, 0.5, 3, 7));
  const bool verify_identical = verify_first == verify_second;

  CheckResult result;
  result.pass = train_identical && verify_identical;
  result.detail = std::string("training outputs ") +
                  (train_identical ? "byte-identical" : "diverged") + " across " +
                  std::to_string(first.size()) + " files, verification summary " +
                  (verify_identical ? "byte-identical" : "diverged");
  return result;
}

struct Check {
  std::string name;
  std::function<CheckResult()> run;
  // Wall-clock bound, folded into the pass verdict; zero means untimed.
  double budget_seconds = 0.0;
};

}  // namespace

int main() {
  std::error_code cleanup;
  fs::remove_all("acceptance", cleanup);

  const std::vector<Check> checks{
      {"pointwise pessimism sweep", check_pointwise_pessimism, 60.0},
      {"state-value sandwich sweep", check_state_value_sandwich, 60.0},
      {"penalty decomposition identity", check_penalty_decomposition, 0.0},
      {"tabular backup equivalence", check_tabular_equivalence, 0.0},
      {"gradient finite-difference suite", check_gradient_suite, 0.0},
      {"ood detector calibration", check_ood_calibration, 600.0},
      {"conservatism ablation ordering", check_ablation_ordering, 0.0},
      {"penalty weight monotonicity", check_alpha_monotonicity, 0.0},
      {"small-data robustness grid", check_small_data_robustness, 7200.0},
      {"rerun determinism", check_rerun_determinism, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult result;
    try {
      result = checks[i].run();
    } catch (const std::exception& error) {
      result.pass = false;
      result.detail = std::string("threw: ") + error.what();
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start).count();
    if (checks[i].budget_seconds > 0.0 && seconds >= checks[i].budget_seconds) {
      result.pass = false;
      result.detail += "; exceeded " + fmt("%.0f", checks[i].budget_seconds) + "s budget";
    }
    if (!result.pass) ++failures;
    std::printf("%2zu %-34s %s  (%s; %.1fs)\n", i + 1, checks[i].name.c_str(),
                result.pass ? "PASS" : "FAIL", result.detail.c_str(), seconds);
    std::fflush(stdout);
  }

  std::printf("acceptance: %zu/%zu checks passed\n", checks.size() - failures, checks.size());
  return failures;
}
