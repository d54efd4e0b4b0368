#include "scq/nn/gaussian_policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scq::nn {

namespace {

constexpr Real kHalfLog2Pi = 0.9189385332046727;

void check_head(const Matrix& head_out) {
  if (head_out.cols() % 2 != 0)
    throw std::invalid_argument("policy head output width must be even (mean | log-std)");
}

}  // namespace

GaussianSample sample_squashed(const Matrix& head_out, const Matrix& noise) {
  check_head(head_out);
  const Index dim = head_out.cols() / 2;
  if (noise.rows() != head_out.rows() || noise.cols() != dim)
    throw std::invalid_argument("noise shape must match (batch, action_dim)");

  GaussianSample s;
  s.mean = head_out.leftCols(dim);
  s.log_std = head_out.rightCols(dim).array().max(kLogStdMin).min(kLogStdMax).matrix();
  s.pre_tanh = (s.mean.array() + s.log_std.array().exp() * noise.array()).matrix();
  s.action = s.pre_tanh.array().tanh().matrix();
  s.log_prob = squashed_log_prob(s.mean, s.log_std, s.pre_tanh);
  return s;
}

Matrix deterministic_action(const Matrix& head_out) {
  check_head(head_out);
  return head_out.leftCols(head_out.cols() / 2).array().tanh().matrix();
}

Matrix squashed_backward(const GaussianSample& sample, const Matrix& head_out,
                         const Matrix& noise, const Matrix& d_action,
                         const Vector& d_log_prob) {
  check_head(head_out);
  const Index dim = head_out.cols() / 2;
  if (d_action.rows() != head_out.rows() || d_action.cols() != dim)
    throw std::invalid_argument("action gradient shape must match (batch, action_dim)");
  if (d_log_prob.size() != head_out.rows())
    throw std::invalid_argument("log-prob gradient length must match the batch");

  const auto t = sample.action.array();
  const auto one_minus_t2 = 1.0 - t.square();
  const auto sigma_noise = sample.log_std.array().exp() * noise.array();

  // d log p / d pre_tanh comes only from the squash correction; the Gaussian
  // part is constant in the reparametrized draw.
  const auto dlogp_du = 2.0 * t * one_minus_t2 / (one_minus_t2 + kSquashEps);
  const auto d_logp_bcast = d_log_prob.replicate(1, dim).array();

  const auto d_pre = d_action.array() * one_minus_t2 + d_logp_bcast * dlogp_du;

  Matrix grad(head_out.rows(), head_out.cols());
  grad.leftCols(dim) = d_pre.matrix();
  // Raw log-std gradients vanish where the clamp is active.
  const auto raw = head_out.rightCols(dim).array();
  const auto pass =
      (raw > kLogStdMin && raw < kLogStdMax).cast<Real>();
  grad.rightCols(dim) = (pass * (d_pre * sigma_noise - d_logp_bcast)).matrix();
  return grad;
}

Vector squashed_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& pre_tanh) {
  const auto xi = (pre_tanh.array() - mean.array()) * (-log_std.array()).exp();
  const auto squash = (1.0 - pre_tanh.array().tanh().square() + kSquashEps).log();
  return (-0.5 * xi.square() - log_std.array() - kHalfLog2Pi - squash)
      .rowwise()
      .sum()
      .matrix();
}

}  // namespace scq::nn
