#include "kippo/rollout.hpp"

namespace kippo {

std::vector<double> build_mask(const uint8_t* dones, int H) {
  std::vector<double> b(static_cast<size_t>(H));
  bool alive = true;
  for (int h = 0; h < H; ++h) {
    if (dones[h]) alive = false;
    b[static_cast<size_t>(h)] = alive ? 1.0 : 0.0;
  }
  return b;
}

GaeOutput compute_gae(const Vector& rewards, const Vector& values,
                      const std::vector<uint8_t>& dones, double bootstrap_value, double gamma,
                      double lambda) {
  Index T = rewards.size();
  if (values.size() != T || dones.size() != static_cast<size_t>(T))
    throw ShapeError("compute_gae: array lengths disagree");
  GaeOutput out;
  out.advantages.resize(T);
  out.returns.resize(T);
  double gae = 0.0;
  for (Index t = T - 1; t >= 0; --t) {
    double not_done = dones[static_cast<size_t>(t)] ? 0.0 : 1.0;
    double next_value = t == T - 1 ? bootstrap_value : values[t + 1];
    double delta = rewards[t] + gamma * next_value * not_done - values[t];
    gae = delta + gamma * lambda * not_done * gae;
    out.advantages[t] = gae;
  }
  out.returns = out.advantages + values;
  return out;
}

SequenceBatch RolloutBuffer::gather_windows(const std::vector<int>& idx) const {
  SequenceBatch seq;
  Index B = static_cast<Index>(idx.size());
  for (int j = 0; j <= H; ++j) {
    Matrix slab(B, states.cols());
    for (Index i = 0; i < B; ++i) slab.row(i) = state_windows[static_cast<size_t>(j)].row(idx[static_cast<size_t>(i)]);
    seq.states.push_back(std::move(slab));
  }
  for (int h = 0; h < H; ++h) {
    Matrix slab(B, actions.cols());
    for (Index i = 0; i < B; ++i) slab.row(i) = action_windows[static_cast<size_t>(h)].row(idx[static_cast<size_t>(i)]);
    seq.actions.push_back(std::move(slab));
    Matrix m(B, 1);
    for (Index i = 0; i < B; ++i) m(i, 0) = mask_windows(idx[static_cast<size_t>(i)], h);
    seq.masks.push_back(std::move(m));
  }
  return seq;
}

std::vector<int> RolloutBuffer::fully_valid_windows() const {
  std::vector<int> out;
  for (int t = H; t < T; ++t) {
    if (mask_windows.row(t).minCoeff() == 1.0) out.push_back(t);
  }
  return out;
}

RolloutBuffer collect_rollout(RolloutCtx& ctx, int T, int H) {
  const EnvSpec& spec = ctx.env.spec();
  RolloutBuffer buf;
  buf.T = T;
  buf.H = H;
  buf.states.resize(T, spec.state_dim);
  buf.actions.resize(T, spec.action_dim);
  buf.exec_actions.resize(T, spec.action_dim);
  buf.rewards.resize(T);
  buf.log_probs.resize(T);
  buf.values.resize(T);
  buf.dones.assign(static_cast<size_t>(T), 0);

  auto encode = [&](const Vector& x) -> Vector {
    if (!ctx.koopman) return x;
    return ctx.koopman->encode_state_eval(x.transpose()).row(0).transpose();
  };

  auto filter = [&](const Vector& raw) -> Vector {
    return ctx.obs_filter ? ctx.obs_filter(raw) : raw;
  };

  Vector obs = *ctx.obs;
  for (int t = 0; t < T; ++t) {
    Vector latent = encode(obs);
    ActResult a = act(ctx.policy, ctx.value_fn, latent, ctx.action_rng);
    Vector exec = a.action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
    StepResult r = ctx.env.step(exec);
    bool done = r.terminated || r.truncated;
    Vector next_obs = filter(r.next_state);

    buf.states.row(t) = obs.transpose();
    buf.actions.row(t) = a.action.transpose();
    buf.exec_actions.row(t) = exec.transpose();
    buf.log_probs[t] = a.log_prob;
    buf.values[t] = a.value;
    buf.dones[static_cast<size_t>(t)] = done ? 1 : 0;

    double reward = r.reward;
    if (r.truncated && !r.terminated) {
      // time-limit end: the episode would have continued, so bootstrap
      Matrix v = ctx.value_fn.net.eval(encode(next_obs).transpose());
      reward += ctx.gamma * v(0, 0);
    }
    buf.rewards[t] = reward;

    if (ctx.on_step) ctx.on_step(t, obs, exec, r.reward, done);

    *ctx.episode_return_acc += r.reward;
    if (done) {
      buf.episode_returns.push_back(*ctx.episode_return_acc);
      *ctx.episode_return_acc = 0.0;
      obs = filter(ctx.env.reset());
    } else {
      obs = next_obs;
    }
  }
  *ctx.obs = obs;

  Matrix v = ctx.value_fn.net.eval(encode(obs).transpose());
  buf.bootstrap_value = v(0, 0);

  // window assembly: zero-pad and fully mask steps without H predecessors
  buf.state_windows.assign(static_cast<size_t>(H + 1), Matrix::Zero(T, spec.state_dim));
  buf.action_windows.assign(static_cast<size_t>(H), Matrix::Zero(T, spec.action_dim));
  buf.mask_windows = Matrix::Zero(T, H);
  for (int t = H; t < T; ++t) {
    for (int j = 0; j <= H; ++j)
      buf.state_windows[static_cast<size_t>(j)].row(t) = buf.states.row(t - H + j);
    for (int h = 0; h < H; ++h)
      buf.action_windows[static_cast<size_t>(h)].row(t) = buf.exec_actions.row(t - H + h);
    std::vector<double> mask = build_mask(&buf.dones[static_cast<size_t>(t - H)], H);
    for (int h = 0; h < H; ++h) buf.mask_windows(t, h) = mask[static_cast<size_t>(h)];
  }
  return buf;
}

}  // namespace kippo
