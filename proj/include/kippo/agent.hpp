#pragma once

#include <vector>

#include "kippo/nn.hpp"

namespace kippo {

// Diagonal Gaussian policy: an MLP produces the mean, a state-independent
// trainable vector holds the per-dimension log standard deviations. log_std is
// clamped to [-20, 2] wherever a density or sample is produced.
struct GaussianPolicy {
  Mlp mean_net;    // input_dim -> action_dim
  Tensor log_std;  // 1 x action_dim

  static GaussianPolicy make(int input_dim, int action_dim, const std::vector<int>& hidden,
                             Rng& rng);
  std::vector<Tensor> parameters() const;
  int action_dim() const { return mean_net.output_dim(); }
};

struct ValueFunction {
  Mlp net;  // input_dim -> 1

  static ValueFunction make(int input_dim, const std::vector<int>& hidden, Rng& rng);
  std::vector<Tensor> parameters() const { return net.parameters(); }
};

struct ActResult {
  Vector action;    // raw Gaussian sample (unclamped)
  double log_prob;  // density at the unclamped sample
  double value;
};

// Samples an action for one (detached) latent state and records what the
// buffer needs. Aborts on non-finite network output.
ActResult act(const GaussianPolicy& policy, const ValueFunction& value_fn, const Vector& latent,
              Rng& action_rng);

// Closed-form diagonal Gaussian log-density.
double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action);
// Closed-form entropy of the policy's action distribution.
double policy_entropy(const GaussianPolicy& policy);

struct PpoConfig {
  double clip_eps = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double pg_coef = 1.0;
  bool norm_adv = true;    // per-minibatch advantage normalization
  bool clip_vloss = true;  // clip the value prediction around its rollout value
};

struct PpoBatch {
  Matrix actions;      // B x action_dim
  Vector old_log_prob;  // B
  Vector advantages;    // B
  Vector returns;       // B
  Vector old_values;    // B
};

struct PpoLoss {
  Tensor total;
  Tensor policy;   // -E[min(r A, clip(r) A)]
  Tensor value;    // E[(V - return)^2], clipped form when enabled
  Tensor entropy;  // closed-form Gaussian entropy
};

// Clipped-surrogate PPO objective on detached latents:
//   total = pg_coef * policy + vf_coef * value - ent_coef * entropy.
PpoLoss ppo_loss(const GaussianPolicy& policy, const ValueFunction& value_fn,
                 const Tensor& latents, const PpoBatch& batch, const PpoConfig& cfg);

}  // namespace kippo
