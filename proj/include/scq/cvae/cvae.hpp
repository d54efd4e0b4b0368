#pragma once

#include <cstdint>

#include "scq/nn/mlp.hpp"
#include "scq/rng.hpp"
#include "scq/types.hpp"

namespace scq::cvae {

// Conditional VAE over dataset actions: the encoder maps state + action to a
// diagonal Gaussian over the latent (mean | log-variance), the decoder maps
// state + latent back to an action. The latent is twice the action width.
struct CvaeModel {
  nn::Mlp encoder;
  nn::Mlp decoder;
  Index state_dim = 0;
  Index action_dim = 0;
  Index latent_dim = 0;
  Vector action_low;
  Vector action_high;
};

// One hidden layer on each side. The decoder's output layer starts at zero,
// so an untrained model reconstructs the center of the action box.
CvaeModel make_cvae(Index state_dim, Index action_dim, Index hidden_width,
                    const Vector& action_low, const Vector& action_high, RngStream& rng);

// Deterministic reconstruction through the posterior mean, clamped to the
// action bounds.
Matrix reconstruct(const CvaeModel& model, const Matrix& states, const Matrix& actions);

// Row-wise Euclidean distance between actions and their reconstructions.
Vector reconstruction_distance(const CvaeModel& model, const Matrix& states,
                               const Matrix& actions);

struct ElboResult {
  Real loss = 0.0;
  Real reconstruction = 0.0;
  Real kl = 0.0;
  Vector encoder_grads;
  Vector decoder_grads;
};

// Mean squared reconstruction error of the reparametrized sample plus
// kl_weight times the mean KL divergence to the standard normal prior.
// The latent noise is passed explicitly so the loss is a deterministic
// function of the parameters.
ElboResult elbo_loss(const CvaeModel& model, const Matrix& states, const Matrix& actions,
                     const Matrix& noise, Real kl_weight);

// Running mean of reconstruction distances; delta is the mean itself.
struct OodThreshold {
  Real delta = 0.0;
  std::int64_t count = 0;
};

void update_delta(OodThreshold& threshold, const Vector& distances);

// Fresh threshold from one frozen-model pass over the given pairs.
OodThreshold measure_delta(const CvaeModel& model, const Matrix& states, const Matrix& actions);

// Distance at or above delta counts as out-of-distribution.
bool is_ood(Real distance, const OodThreshold& threshold);
bool is_ood(const CvaeModel& model, const OodThreshold& threshold, const Vector& state,
            const Vector& action);

}  // namespace scq::cvae
