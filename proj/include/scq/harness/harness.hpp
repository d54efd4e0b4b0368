#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scq/agent/agent.hpp"
#include "scq/envs/dataset.hpp"

namespace scq::harness {

// One offline-RL experiment: a task, a dataset recipe, a method, and the
// training/evaluation protocol, swept over seeds. The agent sub-config's
// seed and total_iterations are run-level here (the seeds list and
// n_iterations), so the JSON form rejects them as unknown keys.
struct ExperimentConfig {
  std::string env = "line-bandit";
  std::string behavior = "medium";
  Real fraction = 1.0;
  // "scq" or one of the baseline names (cql, sac_alpha0, scq_layernorm).
  std::string method = "scq";
  agent::ScqConfig agent;
  Index dataset_size = 20000;
  std::uint64_t dataset_seed = 1;
  // Empty: generate in memory. Set: load from this file, generating and
  // saving it first when absent and generate_if_missing is true.
  std::string dataset_path;
  bool generate_if_missing = true;
  Index n_iterations = 100000;
  Index eval_every = 5000;
  Index metrics_every = 100;
  int n_eval_episodes = 10;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs/default";
  // 0: one worker per seed capped at the hardware thread count.
  int n_workers = 0;
};

void validate(const ExperimentConfig& config);

// JSON round trip. Parsing rejects unknown keys so a misspelled field can
// never fall back to a default silently; absent keys keep their defaults.
// The emitted form embeds its own config_hash, which parsing accepts and
// ignores, so a written config file feeds straight back in.
ExperimentConfig parse_experiment_config(const std::string& text);
std::string experiment_config_json(const ExperimentConfig& config);

// FNV-1a of the canonical JSON form with the output directory blanked and
// the worker count zeroed, so the fingerprint identifies the experiment,
// not where its files landed or how many threads ran it.
std::uint64_t config_hash(const ExperimentConfig& config);

// Task label used in tables and file headers: env-behavior, with a -<pct>pct
// suffix when a strict subsample is in play.
std::string task_label(const ExperimentConfig& config);

struct ResultRow {
  std::string task;
  std::string method;
  Real mean_score = 0.0;
  Real std_score = 0.0;
  int n_seeds = 0;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

// Comment header (config hash, seed list), column header, one row per entry.
std::string result_table_csv(const ResultTable& table, std::uint64_t hash,
                             const std::vector<std::uint64_t>& seeds);
std::string result_table_json(const ResultTable& table, std::uint64_t hash,
                              const std::vector<std::uint64_t>& seeds);

// Two-pass mean and sample standard deviation (zero for fewer than two
// values).
Real mean_of(const std::vector<Real>& values);
Real sample_std(const std::vector<Real>& values);

// Resolves the configured dataset: decoded from dataset_path when set
// (generated and saved there first if missing and generation is enabled),
// otherwise generated in memory; the subsample fraction applies afterwards
// in both cases. The dataset's env must match the config's.
envs::Dataset load_or_generate_dataset(const ExperimentConfig& config);

// Trains one agent per seed (workers run in parallel, one seed each) and
// writes, under output_dir: config.json, per-seed metrics and evaluation
// CSVs, per-seed final checkpoints, and the aggregated result table as CSV
// and JSON. A seed's score is the mean normalized score over its final ten
// evaluation points; the returned table holds one row of mean +- std across
// seeds. All writes are atomic and all bytes are deterministic functions of
// the config.
ResultTable run_experiment(const ExperimentConfig& config);

// One run_experiment per alpha, in order and without dedup, each under
// output_dir/alpha_<value>, plus a per-alpha curve file of the seed-averaged
// mean Q at each logged iteration. Rows are tagged with their alpha.
ResultTable run_alpha_sweep(const ExperimentConfig& config, const std::vector<Real>& alphas);

// Subsamples the configured dataset to each fraction (dataset_seed fixed)
// and runs the conservative agent and its layer-norm ablation on each, a
// |fractions| x 2 grid under output_dir/fraction_<value>/<method>.
ResultTable run_fraction_study(const ExperimentConfig& config, const std::vector<Real>& fractions);

// One theorem-sweep tally. Instances whose random draw breaks a verifier
// precondition (no out-of-distribution mass somewhere, or a negative
// penalty direction) are skipped, not failed; pass rates read
// passed / (passed + failed).
struct TheoremTally {
  int passed = 0;
  int failed = 0;
  int precondition_skips = 0;
  // Most positive constraint violation seen across non-skipped instances;
  // anything at or below the 1e-8 slack counts as a pass.
  Real worst_violation = 0.0;
  // Largest measured interpolation error (pointwise check only).
  Real max_epsilon_bound = 0.0;
};

struct VerifySummary {
  int n_instances = 0;
  Real d_fraction = 0.0;
  int k_iters = 0;
  std::uint64_t seed = 0;
  TheoremTally pointwise;
  TheoremTally state_value;
};

// Sweeps seeded random linear MDPs (4 states, 3 actions, feature dimension
// = d_fraction of the pair count, partition features) through both
// conservatism verifiers: the pointwise check runs k_iters updates over
// drifting policies with the per-step minimal alpha, and the state-value
// check runs a k_iters chain with the smallest alpha_cql that makes the
// sandwich provable along it. k_iters must be at least one iteration.
VerifySummary verify_linear(int n_instances, Real d_fraction, int k_iters, std::uint64_t seed);

std::string verify_summary_json(const VerifySummary& summary);

// When SCQ_OUTPUT_ROOT is set and the path is relative, prefixes it;
// otherwise returns the path unchanged.
std::filesystem::path apply_output_root(const std::string& path);

}  // namespace scq::harness
