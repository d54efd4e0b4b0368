#pragma once

#include "scq/types.hpp"

namespace scq::nn {

inline constexpr Real kLogStdMin = -3.0;
inline constexpr Real kLogStdMax = 2.0;
inline constexpr Real kSquashEps = 1e-6;

// One reparametrized draw from a tanh-squashed diagonal Gaussian head.
// head_out rows are [mean | raw log-std]; log-std is clamped to [-3, 2].
// Actions land in (-1, 1) per dimension.
struct GaussianSample {
  Matrix mean;
  Matrix log_std;   // after clamping
  Matrix pre_tanh;  // mean + exp(log_std) * noise
  Matrix action;    // tanh(pre_tanh)
  Vector log_prob;  // per sample, summed over dimensions, squash-corrected
};

GaussianSample sample_squashed(const Matrix& head_out, const Matrix& noise);

// Greedy head output: tanh(mean).
Matrix deterministic_action(const Matrix& head_out);

// Gradient of a scalar loss with respect to head_out, given its gradients
// with respect to the sampled action and the per-sample log-probability.
// The noise is treated as a constant (reparametrization).
Matrix squashed_backward(const GaussianSample& sample, const Matrix& head_out,
                         const Matrix& noise, const Matrix& d_action,
                         const Vector& d_log_prob);

// Log-density of the squashed Gaussian at an arbitrary pre-tanh point.
Vector squashed_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& pre_tanh);

}  // namespace scq::nn
