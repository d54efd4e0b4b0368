#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scq/agent/agent.hpp"
#include "scq/envs/dataset.hpp"
#include "scq/harness/harness.hpp"
#include "scq/harness/plots.hpp"
#include "scq/util/io.hpp"

namespace {

namespace fs = std::filesystem;
using namespace scq;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token = text.substr(start, comma - start);
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw std::invalid_argument("seeds must be a comma-separated list of integers");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

std::vector<Real> parse_real_list(const std::string& text, const std::string& what) {
  std::vector<Real> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string token = text.substr(start, comma - start);
    try {
      values.push_back(std::stod(token));
    } catch (const std::exception&) {
      throw std::invalid_argument(what + " must be a comma-separated list of numbers");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

// Shared flags for the subcommands that run experiments. Values the user did
// not pass stay unset and leave the config file (or defaults) alone.
struct TrainFlags {
  std::string config_file;
  std::optional<std::string> env;
  std::optional<std::string> behavior;
  std::optional<std::string> method;
  std::optional<Real> fraction;
  std::optional<Real> alpha;
  std::optional<std::int64_t> iterations;
  std::optional<std::int64_t> eval_every;
  std::optional<std::int64_t> metrics_every;
  std::optional<std::int64_t> dataset_size;
  std::optional<std::uint64_t> dataset_seed;
  std::optional<std::string> dataset_path;
  std::optional<std::string> seeds;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--config", flags.config_file, "experiment config JSON file");
  cmd->add_option("--env", flags.env, "task name");
  cmd->add_option("--behavior", flags.behavior, "dataset tier");
  cmd->add_option("--method", flags.method, "scq, cql, sac_alpha0, or scq_layernorm");
  cmd->add_option("--fraction", flags.fraction, "dataset subsample fraction in (0, 1]");
  cmd->add_option("--alpha", flags.alpha, "penalty weight override");
  cmd->add_option("--iterations", flags.iterations, "training iterations");
  cmd->add_option("--eval-every", flags.eval_every, "iterations between evaluations");
  cmd->add_option("--metrics-every", flags.metrics_every, "iterations between metric rows");
  cmd->add_option("--dataset-size", flags.dataset_size, "transitions to generate");
  cmd->add_option("--dataset-seed", flags.dataset_seed, "dataset generation seed");
  cmd->add_option("--dataset", flags.dataset_path, "dataset file to load or create");
  cmd->add_option("--seeds", flags.seeds, "comma-separated training seeds");
  cmd->add_option("--output-dir", flags.output_dir, "run output directory");
  cmd->add_option("--workers", flags.workers, "parallel seed workers (0 = auto)");
}

harness::ExperimentConfig resolve_config(const TrainFlags& flags) {
  harness::ExperimentConfig config;
  if (!flags.config_file.empty()) {
    std::string text;
    try {
      text = read_file(flags.config_file);
    } catch (const std::exception& e) {
      throw std::invalid_argument(e.what());
    }
    config = harness::parse_experiment_config(text);
  }
  if (flags.env) config.env = *flags.env;
  if (flags.behavior) config.behavior = *flags.behavior;
  if (flags.method) config.method = *flags.method;
  if (flags.fraction) config.fraction = *flags.fraction;
  if (flags.alpha) config.agent.alpha = *flags.alpha;
  if (flags.iterations) config.n_iterations = *flags.iterations;
  if (flags.eval_every) config.eval_every = *flags.eval_every;
  if (flags.metrics_every) config.metrics_every = *flags.metrics_every;
  if (flags.dataset_size) config.dataset_size = *flags.dataset_size;
  if (flags.dataset_seed) config.dataset_seed = *flags.dataset_seed;
  if (flags.dataset_path) config.dataset_path = *flags.dataset_path;
  if (flags.seeds) config.seeds = parse_seed_list(*flags.seeds);
  if (flags.output_dir) config.output_dir = *flags.output_dir;
  if (flags.workers) config.n_workers = *flags.workers;
  config.output_dir = harness::apply_output_root(config.output_dir).string();
  harness::validate(config);
  return config;
}

void print_table(const harness::ResultTable& table, const harness::ExperimentConfig& config) {
  std::fputs(
      harness::result_table_csv(table, harness::config_hash(config), config.seeds).c_str(),
      stdout);
  std::printf("outputs: %s\n", config.output_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale offline RL laboratory for strategically conservative Q-learning"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset file");
  std::string gen_env = "line-bandit";
  std::string gen_behavior = "medium";
  std::int64_t gen_size = 20000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  std::string gen_csv;
  gen->add_option("--env", gen_env, "task name");
  gen->add_option("--behavior", gen_behavior,
                  "random, medium, expert, medium-replay-mix, or medium-expert-mix");
  gen->add_option("--size", gen_size, "number of transitions");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output dataset file")->required();
  gen->add_option("--csv", gen_csv, "also export the transitions as CSV here");

  auto* train = app.add_subcommand("train", "train one method over seeds and aggregate scores");
  TrainFlags train_flags;
  add_train_flags(train, train_flags);

  auto* eval = app.add_subcommand("eval", "roll out a trained checkpoint");
  std::string eval_checkpoint;
  std::string eval_env;
  int eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_checkpoint, "agent checkpoint file")->required();
  eval->add_option("--env", eval_env, "task name")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed");

  auto* verify = app.add_subcommand("verify-linear", "sweep the exact-core conservatism checks");
  int verify_instances = 50;
  Real verify_d_fraction = 0.5;
  int verify_iters = 5;
  std::uint64_t verify_seed = 11;
  std::string verify_out;
  verify->add_option("--instances", verify_instances, "number of random instances");
  verify->add_option("--d-fraction", verify_d_fraction,
                     "feature dimension as a fraction of the pair count");
  verify->add_option("--iters", verify_iters, "conservative iterations per instance");
  verify->add_option("--seed", verify_seed, "sweep seed");
  verify->add_option("--out", verify_out, "write the JSON summary here");

  auto* sweep = app.add_subcommand("sweep-alpha", "run one experiment per penalty weight");
  TrainFlags sweep_flags;
  std::string sweep_alphas;
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--alphas", sweep_alphas, "comma-separated penalty weights")->required();

  auto* fraction = app.add_subcommand("fraction-study",
                                      "run the subsample grid against the layer-norm ablation");
  TrainFlags fraction_flags;
  std::string fraction_list = "1.0,0.5,0.3,0.1";
  add_train_flags(fraction, fraction_flags);
  fraction->add_option("--fractions", fraction_list, "comma-separated dataset fractions");

  auto* report = app.add_subcommand("report", "merge result.json files into one table");
  std::vector<std::string> report_inputs;
  std::string report_out;
  report->add_option("--inputs", report_inputs, "directories to scan for result.json files")
      ->required();
  report->add_option("--out", report_out, "also write the merged CSV here");

  auto* plot = app.add_subcommand("plot", "render learning-curve SVG charts");
  std::vector<std::string> plot_files;
  std::string plot_run;
  std::string plot_out_dir = "plots";
  plot->add_option("--files", plot_files, "evaluation CSV files");
  plot->add_option("--run", plot_run, "run directory to collect seed evaluation files from");
  plot->add_option("--out-dir", plot_out_dir, "directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const auto spec = envs::make_env(gen_env);
      const auto dataset = envs::generate_dataset(spec, gen_behavior, gen_size, gen_seed);
      const fs::path out = harness::apply_output_root(gen_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_file_atomic(out, envs::encode_dataset(dataset));
      if (!gen_csv.empty()) {
        const fs::path csv = harness::apply_output_root(gen_csv);
        if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
        write_file_atomic(csv, envs::dataset_csv(dataset));
      }
      std::printf("wrote %s (%lld transitions)\n", out.string().c_str(),
                  static_cast<long long>(dataset.transitions.size()));
      return 0;
    }

    if (train->parsed()) {
      const auto config = resolve_config(train_flags);
      const auto table = harness::run_experiment(config);
      print_table(table, config);
      return 0;
    }

    if (eval->parsed()) {
      const auto spec = envs::make_env(eval_env);
      auto agent_state = agent::agent_from_checkpoint(read_file(eval_checkpoint));
      if (agent_state.state_dim != spec.state_dim || agent_state.action_dim != spec.action_dim) {
        throw std::invalid_argument("checkpoint dimensions do not match the environment");
      }
      const auto result = agent::evaluate_policy(agent_state, spec, eval_episodes, eval_seed);
      const auto scale = envs::score_scale(spec);
      std::printf("episodes=%d mean_return=%s normalized_score=%s\n", eval_episodes,
                  format_double(result.mean_return).c_str(),
                  format_double(envs::normalized_score(scale, result.mean_return)).c_str());
      return 0;
    }

    if (verify->parsed()) {
      const auto summary =
          harness::verify_linear(verify_instances, verify_d_fraction, verify_iters, verify_seed);
      const std::string json_text = harness::verify_summary_json(summary);
      if (!verify_out.empty()) {
        const fs::path out = harness::apply_output_root(verify_out);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        write_file_atomic(out, json_text);
      }
      std::fputs(json_text.c_str(), stdout);
      if (summary.pointwise.failed > 0 || summary.state_value.failed > 0) {
        std::fprintf(stderr, "verification failed: pointwise %d, state-value %d\n",
                     summary.pointwise.failed, summary.state_value.failed);
        return 3;
      }
      return 0;
    }

    if (sweep->parsed()) {
      const auto config = resolve_config(sweep_flags);
      const auto alphas = parse_real_list(sweep_alphas, "alphas");
      const auto table = harness::run_alpha_sweep(config, alphas);
      print_table(table, config);
      return 0;
    }

    if (fraction->parsed()) {
      const auto config = resolve_config(fraction_flags);
      const auto fractions = parse_real_list(fraction_list, "fractions");
      const auto table = harness::run_fraction_study(config, fractions);
      print_table(table, config);
      return 0;
    }

    if (report->parsed()) {
      std::vector<fs::path> sources;
      for (const auto& input : report_inputs) {
        const fs::path root = harness::apply_output_root(input);
        if (fs::is_regular_file(root)) {
          sources.push_back(root);
          continue;
        }
        if (!fs::is_directory(root)) {
          throw std::invalid_argument("report input does not exist: " + root.string());
        }
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
          if (entry.is_regular_file() && entry.path().filename() == "result.json") {
            sources.push_back(entry.path());
          }
        }
      }
      std::sort(sources.begin(), sources.end());
      if (sources.empty()) throw std::invalid_argument("no result.json files found");

      std::string merged = "# merged from " + std::to_string(sources.size()) + " result files\n";
      merged += "task,method,mean_score,std_score,n_seeds\n";
      for (const auto& source : sources) {
        const auto parsed = nlohmann::json::parse(read_file(source));
        for (const auto& row : parsed.at("rows")) {
          merged += row.at("task").get<std::string>() + "," +
                    row.at("method").get<std::string>() + "," +
                    format_double(row.at("mean_score").get<Real>()) + "," +
                    format_double(row.at("std_score").get<Real>()) + "," +
                    std::to_string(row.at("n_seeds").get<int>()) + "\n";
        }
      }
      if (!report_out.empty()) {
        const fs::path out = harness::apply_output_root(report_out);
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        write_file_atomic(out, merged);
      }
      std::fputs(merged.c_str(), stdout);
      return 0;
    }

    if (plot->parsed()) {
      std::vector<fs::path> files;
      for (const auto& file : plot_files) files.emplace_back(file);
      if (!plot_run.empty()) {
        const fs::path run_dir = harness::apply_output_root(plot_run);
        if (!fs::is_directory(run_dir)) {
          throw std::invalid_argument("run directory does not exist: " + run_dir.string());
        }
        std::vector<fs::path> found;
        for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
          const std::string name = entry.path().filename().string();
          if (entry.is_regular_file() && name.rfind("seed", 0) == 0 &&
              name.size() > 10 && name.substr(name.size() - 10) == "_evals.csv") {
            found.push_back(entry.path());
          }
        }
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
      }
      const auto written = harness::emit_plots(files, harness::apply_output_root(plot_out_dir));
      for (const auto& path : written) std::printf("wrote %s\n", path.string().c_str());
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
