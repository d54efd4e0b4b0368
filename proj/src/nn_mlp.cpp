#include "scq/nn/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace scq::nn {

namespace {

constexpr Real kLayerNormEps = 1e-5;

bool has_norm(const MlpShape& shape, Index layer) {
  return shape.layer_norm_hidden && layer + 1 < shape.n_layers();
}

}  // namespace

Index MlpShape::layer_in(Index layer) const {
  return layer == 0 ? input_dim : hidden_dims[static_cast<std::size_t>(layer - 1)];
}

Index MlpShape::layer_out(Index layer) const {
  return layer == n_layers() - 1 ? output_dim : hidden_dims[static_cast<std::size_t>(layer)];
}

Index MlpShape::n_params() const {
  Index total = 0;
  for (Index l = 0; l < n_layers(); ++l) {
    total += layer_out(l) * layer_in(l) + layer_out(l);
    if (layer_norm_hidden && l + 1 < n_layers()) total += 2 * layer_out(l);
  }
  return total;
}

Mlp make_mlp(const MlpShape& shape, RngStream& rng) {
  if (shape.input_dim <= 0 || shape.output_dim <= 0)
    throw std::invalid_argument("mlp dimensions must be positive");
  for (const Index h : shape.hidden_dims)
    if (h <= 0) throw std::invalid_argument("mlp dimensions must be positive");

  Mlp mlp{shape, Vector(shape.n_params())};
  Index at = 0;
  for (Index l = 0; l < shape.n_layers(); ++l) {
    const Index in = shape.layer_in(l);
    const Index out = shape.layer_out(l);
    const Real bound = 1.0 / std::sqrt(static_cast<Real>(in));
    for (Index i = 0; i < out * in + out; ++i) mlp.params[at++] = rng.uniform(-bound, bound);
    if (has_norm(shape, l)) {
      mlp.params.segment(at, out).setOnes();
      mlp.params.segment(at + out, out).setZero();
      at += 2 * out;
    }
  }
  return mlp;
}

Matrix mlp_forward(const Mlp& mlp, const Matrix& input, MlpCache* cache) {
  const MlpShape& shape = mlp.shape;
  if (input.cols() != shape.input_dim) throw std::invalid_argument("mlp input width mismatch");
  if (static_cast<Index>(mlp.params.size()) != shape.n_params())
    throw std::invalid_argument("mlp parameter vector has wrong length");

  if (cache != nullptr) {
    cache->input = input;
    cache->pre.clear();
    cache->normalized.clear();
    cache->inv_std.clear();
    cache->activated.clear();
  }

  Matrix x = input;
  Index at = 0;
  for (Index l = 0; l < shape.n_layers(); ++l) {
    const Index in = shape.layer_in(l);
    const Index out = shape.layer_out(l);
    const auto weight =
        Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            mlp.params.data() + at, out, in);
    at += out * in;
    const auto bias = mlp.params.segment(at, out);
    at += out;

    Matrix z = x * weight.transpose();
    z.rowwise() += bias.transpose();
    if (cache != nullptr) cache->pre.push_back(z);

    if (l == shape.n_layers() - 1) {
      x = std::move(z);
      break;
    }

    if (has_norm(shape, l)) {
      const auto gain = mlp.params.segment(at, out);
      const auto beta = mlp.params.segment(at + out, out);
      at += 2 * out;

      Matrix normalized(z.rows(), out);
      Vector inv_std(z.rows());
      for (Index r = 0; r < z.rows(); ++r) {
        const Real mean = z.row(r).mean();
        const Real var = (z.row(r).array() - mean).square().mean();
        inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
        normalized.row(r) = (z.row(r).array() - mean) * inv_std[r];
      }
      if (cache != nullptr) {
        cache->normalized.push_back(normalized);
        cache->inv_std.push_back(inv_std);
      }
      z = normalized.array().rowwise() * gain.transpose().array();
      z.rowwise() += beta.transpose();
    }

    x = z.cwiseMax(0.0);
    if (cache != nullptr) cache->activated.push_back(x);
  }
  return x;
}

MlpGrads mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& output_grad) {
  const MlpShape& shape = mlp.shape;
  const Index n_layers = shape.n_layers();
  if (static_cast<Index>(cache.pre.size()) != n_layers)
    throw std::invalid_argument("mlp cache does not match the architecture");
  if (output_grad.cols() != shape.output_dim || output_grad.rows() != cache.input.rows())
    throw std::invalid_argument("mlp output gradient shape mismatch");

  // Offsets of each layer's parameter block in the flat vector.
  std::vector<Index> offsets(static_cast<std::size_t>(n_layers));
  Index at = 0;
  for (Index l = 0; l < n_layers; ++l) {
    offsets[static_cast<std::size_t>(l)] = at;
    at += shape.layer_out(l) * shape.layer_in(l) + shape.layer_out(l);
    if (has_norm(shape, l)) at += 2 * shape.layer_out(l);
  }

  MlpGrads grads{Vector::Zero(shape.n_params()), Matrix()};
  Matrix delta = output_grad;

  for (Index l = n_layers - 1; l >= 0; --l) {
    const Index in = shape.layer_in(l);
    const Index out = shape.layer_out(l);
    Index block = offsets[static_cast<std::size_t>(l)];
    const auto weight =
        Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            mlp.params.data() + block, out, in);

    if (l < n_layers - 1) {
      // Through the activation: its input was gain*normalized+beta (with
      // norm) or the affine output (without); either way the activated
      // value is positive exactly where the activation passed gradient.
      const Matrix& act = cache.activated[static_cast<std::size_t>(l)];
      delta = (act.array() > 0.0).select(delta, Matrix::Zero(delta.rows(), delta.cols()));

      if (has_norm(shape, l)) {
        const auto gain = mlp.params.segment(block + out * in + out, out);
        const Matrix& normalized = cache.normalized[static_cast<std::size_t>(l)];
        const Vector& inv_std = cache.inv_std[static_cast<std::size_t>(l)];

        auto gain_grad = grads.params.segment(block + out * in + out, out);
        auto beta_grad = grads.params.segment(block + out * in + out + out, out);
        gain_grad += (delta.array() * normalized.array()).colwise().sum().matrix().transpose();
        beta_grad += delta.colwise().sum().transpose();

        Matrix d_norm = delta.array().rowwise() * gain.transpose().array();
        for (Index r = 0; r < d_norm.rows(); ++r) {
          const Real mean_d = d_norm.row(r).mean();
          const Real mean_dn =
              (d_norm.row(r).array() * normalized.row(r).array()).mean();
          delta.row(r) =
              ((d_norm.row(r).array() - mean_d) - normalized.row(r).array() * mean_dn) *
              inv_std[r];
        }
      }
    }

    const Matrix& layer_input =
        l == 0 ? cache.input : cache.activated[static_cast<std::size_t>(l - 1)];
    auto weight_grad =
        Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            grads.params.data() + block, out, in);
    weight_grad += delta.transpose() * layer_input;
    grads.params.segment(block + out * in, out) += delta.colwise().sum().transpose();

    if (l == 0)
      grads.input = delta * weight;
    else
      delta = delta * weight;
  }
  return grads;
}

Vector layer_norm(const Vector& input, const Vector& gain, const Vector& bias, Real eps) {
  if (gain.size() != input.size() || bias.size() != input.size())
    throw std::invalid_argument("layer_norm parameter lengths must match the input");
  const Real mean = input.mean();
  const Real var = (input.array() - mean).square().mean();
  return (((input.array() - mean) / std::sqrt(var + eps)) * gain.array() + bias.array()).matrix();
}

}  // namespace scq::nn
