#include "scq/cvae/cvae.hpp"

#include <stdexcept>

namespace scq::cvae {

namespace {

Matrix concat_cols(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out.leftCols(left.cols()) = left;
  out.rightCols(right.cols()) = right;
  return out;
}

void check_pair(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  if (states.cols() != model.state_dim || actions.cols() != model.action_dim ||
      states.rows() != actions.rows())
    throw std::invalid_argument("cvae inputs do not match the model dimensions");
}

}  // namespace

CvaeModel make_cvae(Index state_dim, Index action_dim, Index hidden_width,
                    const Vector& action_low, const Vector& action_high, RngStream& rng) {
  if (state_dim <= 0 || action_dim <= 0 || hidden_width <= 0)
    throw std::invalid_argument("cvae dimensions must be positive");
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    throw std::invalid_argument("cvae action bounds must match the action width");

  CvaeModel model;
  model.state_dim = state_dim;
  model.action_dim = action_dim;
  model.latent_dim = 2 * action_dim;
  model.action_low = action_low;
  model.action_high = action_high;

  const nn::MlpShape encoder_shape{state_dim + action_dim, {hidden_width},
                                   2 * model.latent_dim, false};
  model.encoder = nn::make_mlp(encoder_shape, rng);

  const nn::MlpShape decoder_shape{state_dim + model.latent_dim, {hidden_width}, action_dim,
                                   false};
  model.decoder = nn::make_mlp(decoder_shape, rng);
  const Index out_block = decoder_shape.layer_out(1) * decoder_shape.layer_in(1) +
                          decoder_shape.layer_out(1);
  model.decoder.params.tail(out_block).setZero();
  return model;
}

Matrix reconstruct(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  check_pair(model, states, actions);
  const Matrix encoded = nn::mlp_forward(model.encoder, concat_cols(states, actions));
  const Matrix latent_mean = encoded.leftCols(model.latent_dim);
  const Matrix decoded = nn::mlp_forward(model.decoder, concat_cols(states, latent_mean));
  return decoded.cwiseMax(model.action_low.transpose().replicate(decoded.rows(), 1))
      .cwiseMin(model.action_high.transpose().replicate(decoded.rows(), 1));
}

Vector reconstruction_distance(const CvaeModel& model, const Matrix& states,
                               const Matrix& actions) {
  return (actions - reconstruct(model, states, actions)).rowwise().norm();
}

ElboResult elbo_loss(const CvaeModel& model, const Matrix& states, const Matrix& actions,
                     const Matrix& noise, Real kl_weight) {
  check_pair(model, states, actions);
  if (noise.rows() != states.rows() || noise.cols() != model.latent_dim)
    throw std::invalid_argument("cvae latent noise must be (batch, latent_dim)");
  const Real batch = static_cast<Real>(states.rows());

  nn::MlpCache encoder_cache;
  const Matrix encoded =
      nn::mlp_forward(model.encoder, concat_cols(states, actions), &encoder_cache);
  const Matrix mean = encoded.leftCols(model.latent_dim);
  const Matrix log_var = encoded.rightCols(model.latent_dim);
  const Matrix std_dev = (0.5 * log_var.array()).exp().matrix();
  const Matrix latent = mean + std_dev.cwiseProduct(noise);

  nn::MlpCache decoder_cache;
  const Matrix decoded =
      nn::mlp_forward(model.decoder, concat_cols(states, latent), &decoder_cache);
  const Matrix residual = decoded - actions;

  ElboResult result;
  result.reconstruction = residual.squaredNorm() / batch;
  result.kl = (-0.5 *
               (1.0 + log_var.array() - mean.array().square() - log_var.array().exp()))
                  .sum() /
              batch;
  result.loss = result.reconstruction + kl_weight * result.kl;

  const Matrix d_decoded = 2.0 / batch * residual;
  const nn::MlpGrads decoder_grads = nn::mlp_backward(model.decoder, decoder_cache, d_decoded);
  result.decoder_grads = decoder_grads.params;

  const Matrix d_latent = decoder_grads.input.rightCols(model.latent_dim);
  Matrix d_encoded(states.rows(), 2 * model.latent_dim);
  d_encoded.leftCols(model.latent_dim) =
      d_latent + kl_weight / batch * mean;
  d_encoded.rightCols(model.latent_dim) =
      (d_latent.array() * 0.5 * std_dev.array() * noise.array() +
       kl_weight / batch * 0.5 * (log_var.array().exp() - 1.0))
          .matrix();
  result.encoder_grads = nn::mlp_backward(model.encoder, encoder_cache, d_encoded).params;
  return result;
}

void update_delta(OodThreshold& threshold, const Vector& distances) {
  if ((distances.array() < 0.0).any())
    throw std::invalid_argument("reconstruction distances must be nonnegative");
  for (Index i = 0; i < distances.size(); ++i) {
    threshold.count += 1;
    threshold.delta += (distances[i] - threshold.delta) / static_cast<Real>(threshold.count);
  }
}

OodThreshold measure_delta(const CvaeModel& model, const Matrix& states, const Matrix& actions) {
  OodThreshold threshold;
  update_delta(threshold, reconstruction_distance(model, states, actions));
  return threshold;
}

bool is_ood(Real distance, const OodThreshold& threshold) {
  return distance >= threshold.delta;
}

bool is_ood(const CvaeModel& model, const OodThreshold& threshold, const Vector& state,
            const Vector& action) {
  const Vector d =
      reconstruction_distance(model, state.transpose(), action.transpose());
  return is_ood(d[0], threshold);
}

}  // namespace scq::cvae
