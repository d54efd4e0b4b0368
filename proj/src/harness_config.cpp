#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "scq/agent/baselines.hpp"
#include "scq/harness/harness.hpp"
#include "scq/util/io.hpp"

namespace scq::harness {

namespace {

using nlohmann::json;

std::string format_g(Real v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

void reject_unknown_keys(const json& object, const std::vector<std::string>& known,
                         const std::string& scope) {
  for (const auto& item : object.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw std::invalid_argument("unknown config key: " + scope + item.key());
    }
  }
}

json agent_json(const agent::ScqConfig& a) {
  json out;
  out["alpha"] = a.alpha;
  out["beta"] = a.beta;
  out["entropy_mode"] = a.entropy_mode == agent::EntropyMode::kAuto ? "auto" : "fixed";
  out["fixed_lambda"] = a.fixed_lambda;
  if (!std::isnan(a.target_entropy)) out["target_entropy"] = a.target_entropy;
  out["critic_lr"] = a.critic_lr;
  out["actor_lr"] = a.actor_lr;
  out["cvae_lr"] = a.cvae_lr;
  out["lambda_lr"] = a.lambda_lr;
  out["batch_size"] = a.batch_size;
  out["discount"] = a.discount;
  out["upsilon"] = a.upsilon;
  out["ood_sample_budget"] = a.ood_sample_budget;
  out["warmup_iters"] = a.warmup_iters;
  out["actor_hidden"] = a.actor_hidden;
  out["critic_hidden"] = a.critic_hidden;
  out["n_hidden_layers"] = a.n_hidden_layers;
  out["cvae_hidden"] = a.cvae_hidden;
  out["cvae_kl_weight"] = a.cvae_kl_weight;
  out["cosine_actor_lr"] = a.cosine_actor_lr;
  out["penalize_fallback"] = a.penalize_fallback;
  out["ood_machinery"] = a.ood_machinery;
  out["critic_layer_norm"] = a.critic_layer_norm;
  out["critic_loss_kind"] = a.critic_loss_kind == agent::CriticLossKind::kScq ? "scq" : "cql";
  out["delta_refresh_interval"] = a.delta_refresh_interval;
  return out;
}

void parse_agent(const json& object, agent::ScqConfig& a) {
  reject_unknown_keys(object,
                      {"alpha", "beta", "entropy_mode", "fixed_lambda", "target_entropy",
                       "critic_lr", "actor_lr", "cvae_lr", "lambda_lr", "batch_size", "discount",
                       "upsilon", "ood_sample_budget", "warmup_iters", "actor_hidden",
                       "critic_hidden", "n_hidden_layers", "cvae_hidden", "cvae_kl_weight",
                       "cosine_actor_lr", "penalize_fallback", "ood_machinery",
                       "critic_layer_norm", "critic_loss_kind", "delta_refresh_interval"},
                      "agent.");
  a.alpha = object.value("alpha", a.alpha);
  a.beta = object.value("beta", a.beta);
  if (object.contains("entropy_mode")) {
    const auto mode = object.at("entropy_mode").get<std::string>();
    if (mode == "auto") {
      a.entropy_mode = agent::EntropyMode::kAuto;
    } else if (mode == "fixed") {
      a.entropy_mode = agent::EntropyMode::kFixed;
    } else {
      throw std::invalid_argument("entropy_mode must be auto or fixed");
    }
  }
  a.fixed_lambda = object.value("fixed_lambda", a.fixed_lambda);
  if (object.contains("target_entropy")) a.target_entropy = object.at("target_entropy").get<Real>();
  a.critic_lr = object.value("critic_lr", a.critic_lr);
  a.actor_lr = object.value("actor_lr", a.actor_lr);
  a.cvae_lr = object.value("cvae_lr", a.cvae_lr);
  a.lambda_lr = object.value("lambda_lr", a.lambda_lr);
  a.batch_size = object.value("batch_size", a.batch_size);
  a.discount = object.value("discount", a.discount);
  a.upsilon = object.value("upsilon", a.upsilon);
  a.ood_sample_budget = object.value("ood_sample_budget", a.ood_sample_budget);
  a.warmup_iters = object.value("warmup_iters", a.warmup_iters);
  a.actor_hidden = object.value("actor_hidden", a.actor_hidden);
  a.critic_hidden = object.value("critic_hidden", a.critic_hidden);
  a.n_hidden_layers = object.value("n_hidden_layers", a.n_hidden_layers);
  a.cvae_hidden = object.value("cvae_hidden", a.cvae_hidden);
  a.cvae_kl_weight = object.value("cvae_kl_weight", a.cvae_kl_weight);
  a.cosine_actor_lr = object.value("cosine_actor_lr", a.cosine_actor_lr);
  a.penalize_fallback = object.value("penalize_fallback", a.penalize_fallback);
  a.ood_machinery = object.value("ood_machinery", a.ood_machinery);
  a.critic_layer_norm = object.value("critic_layer_norm", a.critic_layer_norm);
  if (object.contains("critic_loss_kind")) {
    const auto kind = object.at("critic_loss_kind").get<std::string>();
    if (kind == "scq") {
      a.critic_loss_kind = agent::CriticLossKind::kScq;
    } else if (kind == "cql") {
      a.critic_loss_kind = agent::CriticLossKind::kCql;
    } else {
      throw std::invalid_argument("critic_loss_kind must be scq or cql");
    }
  }
  a.delta_refresh_interval = object.value("delta_refresh_interval", a.delta_refresh_interval);
}

json config_json_object(const ExperimentConfig& config) {
  json out;
  out["env"] = config.env;
  out["behavior"] = config.behavior;
  out["fraction"] = config.fraction;
  out["method"] = config.method;
  out["agent"] = agent_json(config.agent);
  out["dataset_size"] = config.dataset_size;
  out["dataset_seed"] = config.dataset_seed;
  out["dataset_path"] = config.dataset_path;
  out["generate_if_missing"] = config.generate_if_missing;
  out["n_iterations"] = config.n_iterations;
  out["eval_every"] = config.eval_every;
  out["metrics_every"] = config.metrics_every;
  out["n_eval_episodes"] = config.n_eval_episodes;
  out["seeds"] = config.seeds;
  out["output_dir"] = config.output_dir;
  out["n_workers"] = config.n_workers;
  return out;
}

json row_json(const ResultRow& row) {
  json out;
  out["task"] = row.task;
  out["method"] = row.method;
  out["mean_score"] = row.mean_score;
  out["std_score"] = row.std_score;
  out["n_seeds"] = row.n_seeds;
  return out;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  envs::make_env(config.env);
  if (!(config.fraction > 0.0 && config.fraction <= 1.0)) {
    throw std::invalid_argument("fraction must be in (0, 1]");
  }
  if (config.method != "scq") agent::parse_baseline(config.method);
  agent::validate(config.agent);
  if (config.dataset_size < 1) throw std::invalid_argument("dataset_size must be positive");
  if (config.n_iterations < 1) throw std::invalid_argument("n_iterations must be positive");
  if (config.eval_every < 1) throw std::invalid_argument("eval_every must be positive");
  if (config.metrics_every < 1) throw std::invalid_argument("metrics_every must be positive");
  if (config.n_eval_episodes < 1) throw std::invalid_argument("n_eval_episodes must be positive");
  if (config.seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
  if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() !=
      config.seeds.size()) {
    throw std::invalid_argument("seeds must be distinct");
  }
  if (config.output_dir.empty()) throw std::invalid_argument("output directory must be set");
  if (config.n_workers < 0) throw std::invalid_argument("n_workers must be nonnegative");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json object;
  try {
    object = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid config JSON: ") + e.what());
  }
  if (!object.is_object()) throw std::invalid_argument("config must be a JSON object");

  ExperimentConfig config;
  try {
    reject_unknown_keys(object,
                        {"env", "behavior", "fraction", "method", "agent", "dataset_size",
                         "dataset_seed", "dataset_path", "generate_if_missing", "n_iterations",
                         "eval_every", "metrics_every", "n_eval_episodes", "seeds", "output_dir",
                         "n_workers", "config_hash"},
                        "");
    config.env = object.value("env", config.env);
    config.behavior = object.value("behavior", config.behavior);
    config.fraction = object.value("fraction", config.fraction);
    config.method = object.value("method", config.method);
    if (object.contains("agent")) parse_agent(object.at("agent"), config.agent);
    config.dataset_size = object.value("dataset_size", config.dataset_size);
    config.dataset_seed = object.value("dataset_seed", config.dataset_seed);
    config.dataset_path = object.value("dataset_path", config.dataset_path);
    config.generate_if_missing = object.value("generate_if_missing", config.generate_if_missing);
    config.n_iterations = object.value("n_iterations", config.n_iterations);
    config.eval_every = object.value("eval_every", config.eval_every);
    config.metrics_every = object.value("metrics_every", config.metrics_every);
    config.n_eval_episodes = object.value("n_eval_episodes", config.n_eval_episodes);
    if (object.contains("seeds")) {
      config.seeds = object.at("seeds").get<std::vector<std::uint64_t>>();
    }
    config.output_dir = object.value("output_dir", config.output_dir);
    config.n_workers = object.value("n_workers", config.n_workers);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid config value: ") + e.what());
  }
  validate(config);
  return config;
}

std::string experiment_config_json(const ExperimentConfig& config) {
  json object = config_json_object(config);
  object["config_hash"] = hex64(config_hash(config));
  return object.dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  ExperimentConfig keyed = config;
  keyed.output_dir.clear();
  keyed.n_workers = 0;
  return fnv1a64(config_json_object(keyed).dump());
}

std::string task_label(const ExperimentConfig& config) {
  std::string label = config.env + "-" + config.behavior;
  if (config.fraction < 1.0) label += "-" + format_g(config.fraction * 100.0) + "pct";
  return label;
}

std::string result_table_csv(const ResultTable& table, std::uint64_t hash,
                             const std::vector<std::uint64_t>& seeds) {
  std::string out = "# config " + hex64(hash) + " seeds ";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(seeds[i]);
  }
  out += "\ntask,method,mean_score,std_score,n_seeds\n";
  for (const auto& row : table.rows) {
    out += row.task + "," + row.method + "," + format_double(row.mean_score) + "," +
           format_double(row.std_score) + "," + std::to_string(row.n_seeds) + "\n";
  }
  return out;
}

std::string result_table_json(const ResultTable& table, std::uint64_t hash,
                              const std::vector<std::uint64_t>& seeds) {
  json out;
  out["config_hash"] = hex64(hash);
  out["seeds"] = seeds;
  out["rows"] = json::array();
  for (const auto& row : table.rows) out["rows"].push_back(row_json(row));
  return out.dump(2) + "\n";
}

Real mean_of(const std::vector<Real>& values) {
  if (values.empty()) throw std::invalid_argument("mean of an empty list");
  Real total = 0.0;
  for (const Real v : values) total += v;
  return total / static_cast<Real>(values.size());
}

Real sample_std(const std::vector<Real>& values) {
  if (values.size() < 2) return 0.0;
  const Real mean = mean_of(values);
  Real sum_sq = 0.0;
  for (const Real v : values) sum_sq += (v - mean) * (v - mean);
  return std::sqrt(sum_sq / static_cast<Real>(values.size() - 1));
}

std::filesystem::path apply_output_root(const std::string& path) {
  std::filesystem::path p(path);
  const char* root = std::getenv("SCQ_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && p.is_relative()) return std::filesystem::path(root) / p;
  return p;
}

}  // namespace scq::harness
