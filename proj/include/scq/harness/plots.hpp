#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scq/types.hpp"

namespace scq::harness {

// One seed's evaluation trace as stored in a seed<k>_evals.csv file.
struct EvalCurve {
  std::string task;
  std::string method;
  std::string config_hex;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> iterations;
  std::vector<Real> scores;
};

EvalCurve read_eval_curve(const std::filesystem::path& file);

// Learning-curve chart: per logged iteration, the across-seed mean as a line
// and the min-max envelope as a band (with one curve the band collapses onto
// the line). Axes are iterations versus normalized score; a desc element
// carries the config hashes and seeds. Output bytes are a deterministic
// function of the inputs. Curves must agree on the iteration grid.
std::string learning_curve_svg(const std::string& title, const std::vector<EvalCurve>& curves);

// Groups evaluation files by (task, method), renders one chart per group,
// and writes <task>_<method>.svg into out_dir, returning the paths in group
// order of first appearance.
std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& eval_files,
                                              const std::filesystem::path& out_dir);

}  // namespace scq::harness
