#include <algorithm>
#include <charconv>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "scq/harness/plots.hpp"
#include "scq/util/io.hpp"

namespace scq::harness {

namespace {

namespace fs = std::filesystem;

constexpr Real kWidth = 640.0;
constexpr Real kHeight = 400.0;
constexpr Real kLeft = 70.0;
constexpr Real kRight = 20.0;
constexpr Real kTop = 40.0;
constexpr Real kBottom = 55.0;

std::string format_px(Real v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.2f", v);
  return buffer;
}

std::string format_tick(Real v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    lines.push_back(text.substr(pos, end - pos));
    pos = end == std::string::npos ? text.size() : end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = line.find(sep, start);
    fields.push_back(line.substr(start, at - start));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return fields;
}

struct AxisRange {
  Real lo = 0.0;
  Real hi = 1.0;
};

AxisRange padded_range(Real lo, Real hi) {
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const Real pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

EvalCurve read_eval_curve(const fs::path& file) {
  const auto lines = split_lines(read_file(file));
  if (lines.size() < 2 || lines[0].rfind("# ", 0) != 0) {
    throw std::invalid_argument("evaluation file lacks its header line: " + file.string());
  }
  const auto tokens = split_fields(lines[0], ' ');
  if (tokens.size() != 9 || tokens[1] != "config" || tokens[3] != "seed" || tokens[5] != "task" ||
      tokens[7] != "method") {
    throw std::invalid_argument("malformed evaluation header in " + file.string());
  }
  EvalCurve curve;
  curve.config_hex = tokens[2];
  curve.task = tokens[6];
  curve.method = tokens[8];
  auto seed_result =
      std::from_chars(tokens[4].data(), tokens[4].data() + tokens[4].size(), curve.seed);
  if (seed_result.ec != std::errc()) {
    throw std::invalid_argument("malformed evaluation header in " + file.string());
  }

  if (lines[1] != "iteration,mean_return,normalized_score") {
    throw std::invalid_argument("unexpected columns in metrics file " + file.string());
  }
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i], ',');
    if (fields.size() != 3) {
      throw std::invalid_argument("ragged row in metrics file " + file.string());
    }
    std::int64_t iteration = 0;
    Real score = 0.0;
    auto iter_result =
        std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), iteration);
    auto score_result =
        std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), score);
    if (iter_result.ec != std::errc() || score_result.ec != std::errc()) {
      throw std::invalid_argument("unparseable row in metrics file " + file.string());
    }
    curve.iterations.push_back(iteration);
    curve.scores.push_back(score);
  }
  if (curve.iterations.empty()) {
    throw std::invalid_argument("evaluation file has no rows: " + file.string());
  }
  return curve;
}

std::string learning_curve_svg(const std::string& title, const std::vector<EvalCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("a chart needs at least one curve");
  const auto& grid = curves.front().iterations;
  for (const auto& curve : curves) {
    if (curve.iterations != grid) {
      throw std::invalid_argument("metric files disagree on the iteration grid");
    }
  }

  const std::size_t n = grid.size();
  std::vector<Real> mean(n, 0.0), low(n, 0.0), high(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Real total = 0.0;
    Real lo = curves.front().scores[i];
    Real hi = lo;
    for (const auto& curve : curves) {
      total += curve.scores[i];
      lo = std::min(lo, curve.scores[i]);
      hi = std::max(hi, curve.scores[i]);
    }
    mean[i] = total / static_cast<Real>(curves.size());
    low[i] = lo;
    high[i] = hi;
  }

  const Real x0 = static_cast<Real>(grid.front());
  const Real x1 = static_cast<Real>(grid.back());
  const AxisRange x_range = padded_range(x0, x1);
  const AxisRange y_range =
      padded_range(*std::min_element(low.begin(), low.end()),
                   *std::max_element(high.begin(), high.end()));
  const auto px = [&](Real x) {
    return kLeft + (x - x_range.lo) / (x_range.hi - x_range.lo) * (kWidth - kLeft - kRight);
  };
  const auto py = [&](Real y) {
    return kTop + (1.0 - (y - y_range.lo) / (y_range.hi - y_range.lo)) *
                      (kHeight - kTop - kBottom);
  };

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  svg += "<desc>config ";
  std::vector<std::string> hashes;
  for (const auto& curve : curves) {
    if (std::find(hashes.begin(), hashes.end(), curve.config_hex) == hashes.end()) {
      hashes.push_back(curve.config_hex);
    }
  }
  for (std::size_t i = 0; i < hashes.size(); ++i) svg += (i > 0 ? "," : "") + hashes[i];
  svg += " seeds ";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (i > 0) svg += ",";
    svg += std::to_string(curves[i].seed);
  }
  svg += "</desc>\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"#ffffff\"/>\n";

  std::string band = "<polygon fill=\"#d62728\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) band += " ";
    band += format_px(px(static_cast<Real>(grid[i]))) + "," + format_px(py(high[i]));
  }
  for (std::size_t i = n; i-- > 0;) {
    band += " " + format_px(px(static_cast<Real>(grid[i]))) + "," + format_px(py(low[i]));
  }
  svg += band + "\"/>\n";

  std::string line = "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) line += " ";
    line += format_px(px(static_cast<Real>(grid[i]))) + "," + format_px(py(mean[i]));
  }
  svg += line + "\"/>\n";

  const std::string axis_color = "#333333";
  svg += "<line x1=\"" + format_px(kLeft) + "\" y1=\"" + format_px(kHeight - kBottom) +
         "\" x2=\"" + format_px(kWidth - kRight) + "\" y2=\"" + format_px(kHeight - kBottom) +
         "\" stroke=\"" + axis_color + "\"/>\n";
  svg += "<line x1=\"" + format_px(kLeft) + "\" y1=\"" + format_px(kTop) + "\" x2=\"" +
         format_px(kLeft) + "\" y2=\"" + format_px(kHeight - kBottom) + "\" stroke=\"" +
         axis_color + "\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const Real frac = static_cast<Real>(t) / 4.0;
    const Real x_value = x_range.lo + frac * (x_range.hi - x_range.lo);
    const Real y_value = y_range.lo + frac * (y_range.hi - y_range.lo);
    const Real x_pixel = px(x_value);
    const Real y_pixel = py(y_value);
    svg += "<line x1=\"" + format_px(x_pixel) + "\" y1=\"" + format_px(kHeight - kBottom) +
           "\" x2=\"" + format_px(x_pixel) + "\" y2=\"" + format_px(kHeight - kBottom + 5.0) +
           "\" stroke=\"" + axis_color + "\"/>\n";
    svg += "<text x=\"" + format_px(x_pixel) + "\" y=\"" + format_px(kHeight - kBottom + 18.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           format_tick(x_value) + "</text>\n";
    svg += "<line x1=\"" + format_px(kLeft - 5.0) + "\" y1=\"" + format_px(y_pixel) +
           "\" x2=\"" + format_px(kLeft) + "\" y2=\"" + format_px(y_pixel) + "\" stroke=\"" +
           axis_color + "\"/>\n";
    svg += "<text x=\"" + format_px(kLeft - 8.0) + "\" y=\"" + format_px(y_pixel + 4.0) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" +
           format_tick(y_value) + "</text>\n";
  }

  svg += "<text x=\"" + format_px((kLeft + kWidth - kRight) / 2.0) + "\" y=\"" +
         format_px(kHeight - 14.0) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">iterations"
         "</text>\n";
  svg += "<text x=\"18\" y=\"" + format_px((kTop + kHeight - kBottom) / 2.0) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 " +
         format_px((kTop + kHeight - kBottom) / 2.0) + ")\">normalized score</text>\n";
  svg += "<text x=\"" + format_px((kLeft + kWidth - kRight) / 2.0) + "\" y=\"24\" "
         "font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">" +
         title + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::vector<fs::path> emit_plots(const std::vector<fs::path>& eval_files,
                                 const fs::path& out_dir) {
  if (eval_files.empty()) throw std::invalid_argument("emit_plots needs at least one metric file");

  std::vector<std::string> order;
  std::vector<std::vector<EvalCurve>> groups;
  for (const auto& file : eval_files) {
    EvalCurve curve = read_eval_curve(file);
    const std::string key = curve.task + "|" + curve.method;
    const auto it = std::find(order.begin(), order.end(), key);
    if (it == order.end()) {
      order.push_back(key);
      groups.emplace_back();
      groups.back().push_back(std::move(curve));
    } else {
      groups[static_cast<std::size_t>(it - order.begin())].push_back(std::move(curve));
    }
  }

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const auto& group : groups) {
    const std::string task = group.front().task;
    const std::string method = group.front().method;
    const std::string svg = learning_curve_svg(task + " (" + method + ")", group);
    const fs::path path = out_dir / (task + "_" + method + ".svg");
    write_file_atomic(path, svg);
    written.push_back(path);
  }
  return written;
}

}  // namespace scq::harness
