#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "scq/agent/baselines.hpp"
#include "scq/harness/harness.hpp"
#include "scq/util/io.hpp"

namespace scq::harness {

namespace {

namespace fs = std::filesystem;

agent::ScqConfig effective_agent_config(const ExperimentConfig& config) {
  agent::ScqConfig effective = config.agent;
  if (config.method != "scq") {
    effective = agent::make_baseline(agent::parse_baseline(config.method), effective);
  }
  effective.total_iterations = config.n_iterations;
  return effective;
}

// Iterations after which the policy is evaluated: every eval_every training
// steps, with the final iteration always included.
std::vector<Index> eval_points(Index n_iterations, Index eval_every) {
  std::vector<Index> points;
  for (Index k = eval_every - 1; k < n_iterations; k += eval_every) points.push_back(k);
  if (points.empty() || points.back() != n_iterations - 1) points.push_back(n_iterations - 1);
  return points;
}

std::string header_line(std::uint64_t hash, std::uint64_t seed, const std::string& task,
                        const std::string& method) {
  return "# config " + hex64(hash) + " seed " + std::to_string(seed) + " task " + task +
         " method " + method + "\n";
}

struct SeedOutcome {
  Real score = 0.0;
  std::string metrics_csv;
  std::string evals_csv;
  std::string checkpoint;
};

SeedOutcome run_seed(const ExperimentConfig& config, const agent::ScqConfig& base,
                     const envs::EnvSpec& spec, const envs::ScoreScale& scale,
                     const agent::DatasetTensors& data, std::uint64_t seed, std::uint64_t hash) {
  agent::ScqConfig agent_config = base;
  agent_config.seed = seed;
  agent::AgentState state =
      agent::make_agent(agent_config, spec.state_dim, spec.action_dim, spec.action_low,
                        spec.action_high);

  const auto evals_at = eval_points(config.n_iterations, config.eval_every);
  std::size_t next_eval = 0;

  SeedOutcome out;
  out.metrics_csv = header_line(hash, seed, task_label(config), config.method) +
                    agent::metrics_header() + "\n";
  out.evals_csv = header_line(hash, seed, task_label(config), config.method) +
                  "iteration,mean_return,normalized_score\n";
  std::vector<Real> normalized;

  for (Index it = 0; it < config.n_iterations; ++it) {
    const auto metrics = agent::train_iteration(state, data);
    if (it % config.metrics_every == 0 || it == config.n_iterations - 1) {
      out.metrics_csv += agent::metrics_row(metrics) + "\n";
    }
    if (next_eval < evals_at.size() && evals_at[next_eval] == it) {
      ++next_eval;
      const auto eval = agent::evaluate_policy(state, spec, config.n_eval_episodes, seed);
      const Real score = envs::normalized_score(scale, eval.mean_return);
      normalized.push_back(score);
      out.evals_csv += std::to_string(state.iteration) + "," + format_double(eval.mean_return) +
                       "," + format_double(score) + "\n";
    }
  }

  const std::size_t window = std::min<std::size_t>(10, normalized.size());
  const std::vector<Real> tail(normalized.end() - static_cast<std::ptrdiff_t>(window),
                               normalized.end());
  out.score = mean_of(tail);
  out.checkpoint = agent::save_checkpoint(state);
  return out;
}

// Reads one column of a metrics CSV written by run_experiment, keyed by the
// iteration column.
void parse_metrics_column(const fs::path& file, const std::string& column,
                          std::vector<std::int64_t>& iterations, std::vector<Real>& values) {
  const std::string text = read_file(file);
  std::size_t pos = 0;
  auto next_line = [&]() {
    if (pos >= text.size()) return std::string();
    const std::size_t end = text.find('\n', pos);
    std::string line = text.substr(pos, end - pos);
    pos = end == std::string::npos ? text.size() : end + 1;
    return line;
  };
  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return fields;
  };

  std::string line = next_line();
  if (line.rfind("# ", 0) == 0) line = next_line();
  const auto headers = split(line);
  const auto iter_it = std::find(headers.begin(), headers.end(), "iteration");
  const auto value_it = std::find(headers.begin(), headers.end(), column);
  if (iter_it == headers.end() || value_it == headers.end()) {
    throw std::invalid_argument("metrics file " + file.string() + " lacks column " + column);
  }
  const std::size_t iter_idx = static_cast<std::size_t>(iter_it - headers.begin());
  const std::size_t value_idx = static_cast<std::size_t>(value_it - headers.begin());

  iterations.clear();
  values.clear();
  while (true) {
    line = next_line();
    if (line.empty()) break;
    const auto fields = split(line);
    if (fields.size() != headers.size()) {
      throw std::invalid_argument("ragged row in metrics file " + file.string());
    }
    std::int64_t iteration = 0;
    auto iter_result = std::from_chars(fields[iter_idx].data(),
                                       fields[iter_idx].data() + fields[iter_idx].size(),
                                       iteration);
    Real value = 0.0;
    auto value_result = std::from_chars(fields[value_idx].data(),
                                        fields[value_idx].data() + fields[value_idx].size(),
                                        value);
    if (iter_result.ec != std::errc() || value_result.ec != std::errc()) {
      throw std::invalid_argument("unparseable row in metrics file " + file.string());
    }
    iterations.push_back(iteration);
    values.push_back(value);
  }
}

void write_mean_q_curve(const ExperimentConfig& sub, Real alpha) {
  const fs::path dir(sub.output_dir);
  std::vector<std::int64_t> grid;
  std::vector<Real> sums;
  for (std::size_t k = 0; k < sub.seeds.size(); ++k) {
    std::vector<std::int64_t> iterations;
    std::vector<Real> values;
    parse_metrics_column(dir / ("seed" + std::to_string(sub.seeds[k]) + "_metrics.csv"), "mean_q",
                         iterations, values);
    if (k == 0) {
      grid = iterations;
      sums.assign(values.begin(), values.end());
    } else {
      if (iterations != grid) {
        throw std::invalid_argument("metrics files disagree on the iteration grid");
      }
      for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += values[i];
    }
  }

  std::string out = "# config " + hex64(config_hash(sub)) + " alpha " + format_double(alpha) +
                    " seeds ";
  for (std::size_t i = 0; i < sub.seeds.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(sub.seeds[i]);
  }
  out += "\niteration,mean_q\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out += std::to_string(grid[i]) + "," +
           format_double(sums[i] / static_cast<Real>(sub.seeds.size())) + "\n";
  }
  write_file_atomic(dir / "mean_q_curve.csv", out);
}

void write_table_files(const fs::path& dir, const std::string& stem, const ResultTable& table,
                       std::uint64_t hash, const std::vector<std::uint64_t>& seeds) {
  write_file_atomic(dir / (stem + ".csv"), result_table_csv(table, hash, seeds));
  write_file_atomic(dir / (stem + ".json"), result_table_json(table, hash, seeds));
}

}  // namespace

envs::Dataset load_or_generate_dataset(const ExperimentConfig& config) {
  validate(config);
  const auto spec = envs::make_env(config.env);
  envs::Dataset dataset;
  if (config.dataset_path.empty()) {
    dataset =
        envs::generate_dataset(spec, config.behavior, config.dataset_size, config.dataset_seed);
  } else {
    const fs::path path(config.dataset_path);
    if (fs::exists(path)) {
      dataset = envs::decode_dataset(read_file(path));
    } else if (config.generate_if_missing) {
      dataset =
          envs::generate_dataset(spec, config.behavior, config.dataset_size, config.dataset_seed);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_file_atomic(path, envs::encode_dataset(dataset));
    } else {
      throw std::invalid_argument("dataset missing and generation disabled: " +
                                  config.dataset_path);
    }
  }
  if (dataset.meta.env != config.env) {
    throw std::invalid_argument("dataset env does not match the config");
  }
  if (config.fraction < 1.0) dataset = envs::subsample(dataset, config.fraction,
                                                       config.dataset_seed);
  return dataset;
}

ResultTable run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto dataset = load_or_generate_dataset(config);
  const auto spec = envs::make_env(config.env);
  if (dataset.meta.state_dim != spec.state_dim || dataset.meta.action_dim != spec.action_dim) {
    throw std::invalid_argument("dataset dimensions do not match the environment");
  }
  const auto scale = envs::score_scale(spec);
  const auto data = agent::dataset_tensors(dataset);
  const auto base = effective_agent_config(config);
  const std::uint64_t hash = config_hash(config);

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= config.seeds.size()) return;
      try {
        outcomes[i] = run_seed(config, base, spec, scale, data, config.seeds[i], hash);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int hardware = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int n_workers = std::min<int>(static_cast<int>(config.seeds.size()),
                                      config.n_workers > 0 ? config.n_workers : hardware);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  write_file_atomic(out_dir / "config.json", experiment_config_json(config));
  std::vector<Real> scores;
  for (std::size_t k = 0; k < config.seeds.size(); ++k) {
    const std::string stem = "seed" + std::to_string(config.seeds[k]);
    write_file_atomic(out_dir / (stem + "_metrics.csv"), outcomes[k].metrics_csv);
    write_file_atomic(out_dir / (stem + "_evals.csv"), outcomes[k].evals_csv);
    write_file_atomic(out_dir / (stem + "_checkpoint.scqc"), outcomes[k].checkpoint);
    scores.push_back(outcomes[k].score);
  }

  ResultTable table;
  table.rows.push_back({task_label(config), config.method, mean_of(scores), sample_std(scores),
                        static_cast<int>(config.seeds.size())});
  write_table_files(out_dir, "result", table, hash, config.seeds);
  return table;
}

ResultTable run_alpha_sweep(const ExperimentConfig& config, const std::vector<Real>& alphas) {
  if (alphas.empty()) throw std::invalid_argument("alpha sweep needs at least one alpha");
  validate(config);

  ResultTable combined;
  for (const Real alpha : alphas) {
    ExperimentConfig sub = config;
    sub.agent.alpha = alpha;
    sub.output_dir = config.output_dir + "/alpha_" + format_double(alpha);
    const ResultTable table = run_experiment(sub);
    for (ResultRow row : table.rows) {
      row.method += "(alpha=" + format_double(alpha) + ")";
      combined.rows.push_back(std::move(row));
    }
    write_mean_q_curve(sub, alpha);
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  write_table_files(out_dir, "sweep_result", combined, config_hash(config), config.seeds);
  return combined;
}

ResultTable run_fraction_study(const ExperimentConfig& config, const std::vector<Real>& fractions) {
  if (fractions.empty()) throw std::invalid_argument("fraction study needs at least one fraction");
  validate(config);

  ResultTable grid;
  for (const Real fraction : fractions) {
    for (const std::string& method : {std::string("scq"), std::string("scq_layernorm")}) {
      ExperimentConfig sub = config;
      sub.fraction = fraction;
      sub.method = method;
      sub.output_dir =
          config.output_dir + "/fraction_" + format_double(fraction) + "/" + method;
      const ResultTable table = run_experiment(sub);
      grid.rows.insert(grid.rows.end(), table.rows.begin(), table.rows.end());
    }
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  write_table_files(out_dir, "fraction_result", grid, config_hash(config), config.seeds);
  return grid;
}

}  // namespace scq::harness
