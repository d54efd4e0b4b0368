#include "scq/linear/serialize.hpp"

namespace scq::linear {

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  nlohmann::json flat = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

Matrix matrix_from(const nlohmann::json& flat, Index rows, Index cols) {
  if (static_cast<Index>(flat.size()) != rows * cols)
    throw std::invalid_argument("matrix payload has wrong length");
  Matrix m(rows, cols);
  Index i = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(i++)].get<Real>();
  return m;
}

}  // namespace

nlohmann::json to_json(const LinearMdpSpec& spec) {
  nlohmann::json doc;
  doc["n_states"] = spec.n_states;
  doc["n_actions"] = spec.n_actions;
  doc["feature_dim"] = spec.feature_dim;
  doc["features"] = matrix_rows(spec.features);
  doc["transition_measures"] = matrix_rows(spec.transition_measures);
  doc["reward_weights"] = std::vector<Real>(spec.reward_weights.begin(), spec.reward_weights.end());
  doc["discount"] = spec.discount;
  return doc;
}

LinearMdpSpec spec_from_json(const nlohmann::json& doc) {
  LinearMdpSpec spec;
  spec.n_states = doc.at("n_states").get<Index>();
  spec.n_actions = doc.at("n_actions").get<Index>();
  spec.feature_dim = doc.at("feature_dim").get<Index>();
  spec.features = matrix_from(doc.at("features"), spec.n_states * spec.n_actions, spec.feature_dim);
  spec.transition_measures =
      matrix_from(doc.at("transition_measures"), spec.n_states, spec.feature_dim);
  const auto theta = doc.at("reward_weights").get<std::vector<Real>>();
  spec.reward_weights = Eigen::Map<const Vector>(theta.data(), static_cast<Index>(theta.size()));
  spec.discount = doc.at("discount").get<Real>();
  validate(spec);
  return spec;
}

nlohmann::json to_json(const VerificationReport& report) {
  nlohmann::json doc;
  doc["iterations"] = report.iterations;
  doc["max_violation"] = report.max_violation;
  doc["per_pair_gaps"] = matrix_rows(report.per_pair_gaps);
  doc["gap_rows"] = report.per_pair_gaps.rows();
  doc["gap_cols"] = report.per_pair_gaps.cols();
  doc["alpha_used"] = report.alpha_used;
  doc["epsilon_bound"] = report.epsilon_bound;
  doc["passed"] = report.passed;
  return doc;
}

VerificationReport report_from_json(const nlohmann::json& doc) {
  VerificationReport report;
  report.iterations = doc.at("iterations").get<int>();
  report.max_violation = doc.at("max_violation").get<Real>();
  report.per_pair_gaps = matrix_from(doc.at("per_pair_gaps"), doc.at("gap_rows").get<Index>(),
                                     doc.at("gap_cols").get<Index>());
  report.alpha_used = doc.at("alpha_used").get<Real>();
  report.epsilon_bound = doc.at("epsilon_bound").get<Real>();
  report.passed = doc.at("passed").get<bool>();
  return report;
}

}  // namespace scq::linear
