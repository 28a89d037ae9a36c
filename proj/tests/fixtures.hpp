#pragma once

#include <vector>

#include "kippo/env.hpp"
#include "kippo/koopman.hpp"
#include "kippo/rng.hpp"

namespace kippo::testing {

// Exact latent model for linpoly: the quadratic feature path realizes the
// lifting (x1, x2, x1^2), the latent matrices are the closed-form lifted
// dynamics, and the decoder selects (z1, z2).
inline KoopmanModel make_linpoly_oracle_model(double mu = -0.05, double lambda = -1.0,
                                              double dt = 0.05) {
  KoopmanConfig kc;
  kc.state_dim = 2;
  kc.action_dim = 1;
  kc.latent_dim = 3;
  kc.action_latent_dim = 1;
  kc.hidden = {};
  kc.encoder_features = FeatureMap::quadratic;
  Rng rng(0);
  KoopmanModel m = KoopmanModel::make(kc, rng);

  // encoder input features are [x1, x2, x1^2, x2^2]; select (x1, x2, x1^2)
  Matrix enc_w = Matrix::Zero(4, 3);
  enc_w(0, 0) = 1.0;
  enc_w(1, 1) = 1.0;
  enc_w(2, 2) = 1.0;
  m.state_encoder.layers()[0].W.raw_value() = enc_w;
  m.state_encoder.layers()[0].b.raw_value().setZero();

  Matrix dec_w = Matrix::Zero(3, 2);
  dec_w(0, 0) = 1.0;
  dec_w(1, 1) = 1.0;
  m.state_decoder.layers()[0].W.raw_value() = dec_w;
  m.state_decoder.layers()[0].b.raw_value().setZero();

  m.action_encoder.layers()[0].W.raw_value() = Matrix::Identity(1, 1);
  m.action_encoder.layers()[0].b.raw_value().setZero();

  Matrix A, B;
  linpoly_lifted_dynamics(mu, lambda, dt, A, B);
  m.transition.raw_value() = A;
  m.control.raw_value() = B;
  return m;
}

// Identity autoencoder with m = state_dim: single linear layers carrying the
// identity, so encode(x) == x and decode(y) == y bitwise.
inline KoopmanModel make_identity_model(int state_dim, int action_dim) {
  KoopmanConfig kc;
  kc.state_dim = state_dim;
  kc.action_dim = action_dim;
  kc.latent_dim = state_dim;
  kc.action_latent_dim = action_dim;
  kc.hidden = {};
  Rng rng(0);
  KoopmanModel m = KoopmanModel::make(kc, rng);
  m.state_encoder.layers()[0].W.raw_value() = Matrix::Identity(state_dim, state_dim);
  m.state_encoder.layers()[0].b.raw_value().setZero();
  m.state_decoder.layers()[0].W.raw_value() = Matrix::Identity(state_dim, state_dim);
  m.state_decoder.layers()[0].b.raw_value().setZero();
  m.transition.raw_value() = Matrix::Identity(state_dim, state_dim);
  m.control.raw_value().setZero();
  return m;
}

// Random on-policy-style windows from an environment under uniform actions.
// Episodes that end inside a window break its mask exactly as in training.
inline SequenceBatch sample_env_windows(Env& env, int batch, int H, uint64_t seed) {
  Rng rng(seed);
  const EnvSpec& spec = env.spec();
  SequenceBatch seq;
  seq.states.assign(static_cast<size_t>(H + 1), Matrix::Zero(batch, spec.state_dim));
  seq.actions.assign(static_cast<size_t>(H), Matrix::Zero(batch, spec.action_dim));
  seq.masks.assign(static_cast<size_t>(H), Matrix::Ones(batch, 1));
  Vector obs = env.reset(seed);
  for (int b = 0; b < batch; ++b) {
    bool alive = true;
    for (int h = 0; h <= H; ++h) {
      seq.states[static_cast<size_t>(h)].row(b) = obs.transpose();
      if (h == H) break;
      Vector a(spec.action_dim);
      for (Index i = 0; i < a.size(); ++i)
        a[i] = rng.uniform(spec.action_low[i], spec.action_high[i]);
      seq.actions[static_cast<size_t>(h)].row(b) = a.transpose();
      if (!alive) {
        seq.masks[static_cast<size_t>(h)](b, 0) = 0.0;
        continue;
      }
      StepResult r = env.step(a);
      if (r.terminated || r.truncated) {
        alive = false;
        for (int hh = h; hh < H; ++hh) seq.masks[static_cast<size_t>(hh)](b, 0) = 0.0;
        obs = env.reset();
      } else {
        obs = r.next_state;
      }
    }
  }
  return seq;
}

}  // namespace kippo::testing
