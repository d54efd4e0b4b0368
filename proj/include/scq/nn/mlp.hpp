#pragma once

#include <vector>

#include "scq/rng.hpp"
#include "scq/types.hpp"

namespace scq::nn {

// Fixed rectified-linear MLP architecture. Hidden layers may insert layer
// normalization (with learned gain/bias) between the affine map and the
// activation; the output layer is always plain affine.
struct MlpShape {
  Index input_dim = 0;
  std::vector<Index> hidden_dims;
  Index output_dim = 0;
  bool layer_norm_hidden = false;

  Index n_layers() const { return static_cast<Index>(hidden_dims.size()) + 1; }
  Index layer_in(Index layer) const;
  Index layer_out(Index layer) const;
  Index n_params() const;
};

// Parameters live in one flat vector, laid out per layer as the weight
// matrix (row-major, out x in), the bias, then gain and bias when layer
// normalization is enabled on that hidden layer.
struct Mlp {
  MlpShape shape;
  Vector params;
};

// Uniform fan-in initialization; layer-norm gains start at 1, biases at 0.
Mlp make_mlp(const MlpShape& shape, RngStream& rng);

// Everything the backward pass needs about one forward evaluation. Batches
// are row-major: row = sample.
struct MlpCache {
  Matrix input;
  std::vector<Matrix> pre;         // affine outputs per layer
  std::vector<Matrix> normalized;  // layer-norm outputs (pre gain/bias)
  std::vector<Vector> inv_std;     // per-sample layer-norm scale
  std::vector<Matrix> activated;   // layer outputs fed to the next layer
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& input, MlpCache* cache = nullptr);

struct MlpGrads {
  Vector params;
  Matrix input;
};

// Exact reverse-mode gradients of mlp_forward with respect to parameters and
// input, seeded by d(loss)/d(output).
MlpGrads mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& output_grad);

// Row-wise standardization followed by the learned affine map:
// (x - mean) / sqrt(var + eps) * gain + bias, statistics over features.
Vector layer_norm(const Vector& input, const Vector& gain, const Vector& bias, Real eps = 1e-5);

}  // namespace scq::nn
