#pragma once

#include <vector>

#include "kippo/nn.hpp"

namespace kippo {

// m defaults to 4x the state dimension, clamped to [8, 48]; k to max(4, 2x
// the action dimension).
int default_latent_dim(int state_dim);
int default_action_latent_dim(int action_dim);

struct KoopmanConfig {
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 0;         // m
  int action_latent_dim = 0;  // k
  std::vector<int> hidden{128, 128};
  FeatureMap encoder_features = FeatureMap::none;  // fixture hook
};

// Auxiliary representation learner: state autoencoder, action encoder, and
// the linear latent dynamics y' = transition * y + control * v. The
// transition matrix starts orthogonal, the control matrix starts at zero so
// control effects are learned gradually; both are verified at construction.
struct KoopmanModel {
  Mlp state_encoder;   // state_dim -> m
  Mlp state_decoder;   // m -> state_dim
  Mlp action_encoder;  // action_dim -> k
  Tensor transition;   // m x m
  Tensor control;      // m x k
  int latent_dim = 0;
  int action_latent_dim = 0;

  static KoopmanModel make(const KoopmanConfig& cfg, Rng& root);
  std::vector<Tensor> parameters() const;

  Tensor encode_state(const Tensor& x) const;   // rejects non-finite input
  Tensor decode_state(const Tensor& y) const;
  Tensor encode_action(const Tensor& u) const;
  Matrix encode_state_eval(const Matrix& x) const;
  Matrix decode_state_eval(const Matrix& y) const;
  Matrix encode_action_eval(const Matrix& u) const;
};

struct PredictionBatch {
  Tensor y0;                            // B x m
  std::vector<Tensor> encoded_actions;  // H of B x k
  std::vector<Tensor> predicted;        // H of B x m, steps 1..H
};

// Unrolls the latent dynamics H steps from y0, feeding predictions forward.
PredictionBatch predict_latent_sequence(const KoopmanModel& model, const Tensor& y0,
                                        const std::vector<Tensor>& actions);

// One minibatch of prediction windows, as plain buffer data: H+1 state
// snapshots, H actions, H mask columns (1 while the source episode is alive).
struct SequenceBatch {
  std::vector<Matrix> states;   // H+1 of B x state_dim; element 0 seeds the prediction
  std::vector<Matrix> actions;  // H of B x action_dim
  std::vector<Matrix> masks;    // H of B x 1
  Index batch() const { return states.empty() ? 0 : states[0].rows(); }
  int horizon() const { return static_cast<int>(actions.size()); }
};

// Mean squared reconstruction error of the state autoencoder, averaged over
// batch and state dimensions.
Tensor loss_reconstruction(const KoopmanModel& model, const Tensor& states);

// Masked multi-step prediction losses. Each window contributes the mean over
// its horizon (1/H, regardless of how many steps the mask keeps; set
// norm_by_valid to divide by the number of unmasked steps instead), and the
// batch is averaged. latent: predicted latents against encoded true states;
// state: decoded predictions against true states.
Tensor loss_latent_prediction(const KoopmanModel& model, const SequenceBatch& seq,
                              bool norm_by_valid = false);
Tensor loss_state_prediction(const KoopmanModel& model, const SequenceBatch& seq,
                             bool norm_by_valid = false);

struct PredictionLosses {
  Tensor latent;
  Tensor state;
};
// Both prediction losses off one shared encoder/unroll pass.
PredictionLosses prediction_losses(const KoopmanModel& model, const SequenceBatch& seq,
                                   bool norm_by_valid = false);

// Weighted sum of the three (already batch-averaged) representation losses.
Tensor loss_representation_total(const Tensor& rec, const Tensor& latent, const Tensor& state,
                                 double w_rec, double w_ls, double w_ss);

}  // namespace kippo
