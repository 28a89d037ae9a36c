#include "kippo/agent.hpp"

#include <algorithm>
#include <cmath>

namespace kippo {

namespace {
constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kHalfLog2PiE = 1.4189385332046727;
}  // namespace

GaussianPolicy GaussianPolicy::make(int input_dim, int action_dim,
                                    const std::vector<int>& hidden, Rng& rng) {
  GaussianPolicy p;
  p.mean_net = Mlp::make(input_dim, hidden, action_dim, rng, "actor");
  p.log_std = Tensor::parameter(Matrix::Zero(1, action_dim), "actor.log_std");
  return p;
}

std::vector<Tensor> GaussianPolicy::parameters() const {
  std::vector<Tensor> out = mean_net.parameters();
  out.push_back(log_std);
  return out;
}

ValueFunction ValueFunction::make(int input_dim, const std::vector<int>& hidden, Rng& rng) {
  ValueFunction v;
  v.net = Mlp::make(input_dim, hidden, 1, rng, "critic");
  return v;
}

double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action) {
  double out = 0.0;
  for (Index i = 0; i < mean.size(); ++i) {
    double ls = std::clamp(log_std[i], kLogStdMin, kLogStdMax);
    double z = (action[i] - mean[i]) * std::exp(-ls);
    out += -0.5 * (z * z + kLog2Pi) - ls;
  }
  return out;
}

double policy_entropy(const GaussianPolicy& policy) {
  double out = 0.0;
  for (Index i = 0; i < policy.log_std.cols(); ++i)
    out += std::clamp(policy.log_std.value()(0, i), kLogStdMin, kLogStdMax) + kHalfLog2PiE;
  return out;
}

ActResult act(const GaussianPolicy& policy, const ValueFunction& value_fn, const Vector& latent,
              Rng& action_rng) {
  Matrix mean_row = policy.mean_net.eval(latent.transpose());
  Matrix value_row = value_fn.net.eval(latent.transpose());
  if (!mean_row.allFinite() || !value_row.allFinite())
    throw NanAbort("act: non-finite actor/critic output");
  ActResult r;
  r.action.resize(mean_row.cols());
  Vector log_std(mean_row.cols());
  for (Index i = 0; i < mean_row.cols(); ++i) {
    double ls = std::clamp(policy.log_std.value()(0, i), kLogStdMin, kLogStdMax);
    log_std[i] = ls;
    r.action[i] = mean_row(0, i) + std::exp(ls) * action_rng.normal();
  }
  r.log_prob = gaussian_log_prob(mean_row.row(0).transpose(), log_std, r.action);
  r.value = value_row(0, 0);
  return r;
}

PpoLoss ppo_loss(const GaussianPolicy& policy, const ValueFunction& value_fn,
                 const Tensor& latents, const PpoBatch& batch, const PpoConfig& cfg) {
  Index B = latents.rows();
  Index d = policy.action_dim();
  if (batch.actions.rows() != B || batch.old_log_prob.size() != B ||
      batch.advantages.size() != B || batch.returns.size() != B || batch.old_values.size() != B)
    throw ShapeError("ppo_loss: batch arrays disagree on batch size");

  Vector adv = batch.advantages;
  if (cfg.norm_adv) {
    double mean = adv.mean();
    double sd = B > 1 ? std::sqrt((adv.array() - mean).square().sum() / double(B - 1)) : 0.0;
    adv = (adv.array() - mean) / (sd + 1e-8);
  }

  // policy term
  Tensor mean_out = policy.mean_net.forward(latents);
  Tensor log_std = clamp(policy.log_std, kLogStdMin, kLogStdMax);
  Tensor ls_rows = broadcast_rows(log_std, B);
  Tensor diff = sub(Tensor::constant(batch.actions), mean_out);
  Tensor z = mul(diff, exp_t(neg(ls_rows)));
  Tensor per_dim = add_const(add(square(z), scale(ls_rows, 2.0)), kLog2Pi);
  Tensor new_logp = scale(row_sum(per_dim), -0.5);  // B x 1
  Tensor ratio = exp_t(sub(new_logp, Tensor::constant(batch.old_log_prob)));
  Tensor adv_t = Tensor::constant(Matrix(adv));
  Tensor unclipped = mul(ratio, adv_t);
  Tensor clipped = mul(clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_t);
  PpoLoss out;
  out.policy = neg(mean_all(min_t(unclipped, clipped)));

  // value term
  Tensor v = value_fn.net.forward(latents);  // B x 1
  Tensor ret = Tensor::constant(Matrix(batch.returns));
  Tensor err_sq = square(sub(v, ret));
  if (cfg.clip_vloss) {
    Tensor old_v = Tensor::constant(Matrix(batch.old_values));
    Tensor v_clip = add(old_v, clamp(sub(v, old_v), -cfg.clip_eps, cfg.clip_eps));
    out.value = mean_all(max_t(err_sq, square(sub(v_clip, ret))));
  } else {
    out.value = mean_all(err_sq);
  }

  // entropy (state-independent for a diagonal Gaussian with fixed log_std)
  out.entropy = add_const(sum_all(log_std), static_cast<double>(d) * kHalfLog2PiE);

  out.total = add(add(scale(out.policy, cfg.pg_coef), scale(out.value, cfg.vf_coef)),
                  scale(out.entropy, -cfg.ent_coef));
  return out;
}

}  // namespace kippo
