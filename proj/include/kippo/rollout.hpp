#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "kippo/agent.hpp"
#include "kippo/env.hpp"
#include "kippo/koopman.hpp"

namespace kippo {

// On-policy experience for one update: standard PPO fields plus sliding
// prediction windows. The window stored at step t looks backward: its first
// element is states[t-H], its targets run through states[t], its actions are
// the executed actions of steps t-H..t-1, and its mask drops every step at or
// past an episode boundary. Steps with fewer than H predecessors in this
// buffer are zero-padded and fully masked. Window slabs are indexed by window
// position: state_windows[j].row(t) == states.row(t - H + j).
struct RolloutBuffer {
  int T = 0;
  int H = 0;
  Matrix states;        // T x state_dim
  Matrix actions;       // T x action_dim, raw policy samples
  Matrix exec_actions;  // T x action_dim, clamped actions the env consumed
  Vector rewards;       // includes the bootstrap adjustment on truncation
  Vector log_probs;
  Vector values;
  std::vector<uint8_t> dones;  // terminated OR truncated

  std::vector<Matrix> state_windows;   // H+1 slabs of T x state_dim
  std::vector<Matrix> action_windows;  // H slabs of T x action_dim
  Matrix mask_windows;                 // T x H

  double bootstrap_value = 0.0;  // V(state after step T-1)
  std::vector<double> episode_returns;  // episodes completed this rollout (raw rewards)

  // Gathers the window rows for a set of step indices.
  SequenceBatch gather_windows(const std::vector<int>& idx) const;
  // Steps whose window has full history and an all-ones mask.
  std::vector<int> fully_valid_windows() const;
};

// Mask bits for one window: b[h-1] = 1 iff no done flag is set within the
// first h steps of the window. Monotone non-increasing.
std::vector<double> build_mask(const uint8_t* dones, int H);

struct GaeOutput {
  Vector advantages;
  Vector returns;  // advantages + values
};

// delta_t = r_t + gamma*V_{t+1}*(1-done_t) - V_t
// A_t     = delta_t + gamma*lambda*(1-done_t)*A_{t+1}
GaeOutput compute_gae(const Vector& rewards, const Vector& values,
                      const std::vector<uint8_t>& dones, double bootstrap_value, double gamma,
                      double lambda);

struct RolloutCtx {
  Env& env;
  const KoopmanModel* koopman = nullptr;  // null: policy consumes raw states
  const GaussianPolicy& policy;
  const ValueFunction& value_fn;
  Rng& action_rng;
  double gamma = 0.99;
  Vector* obs = nullptr;                 // current observation, updated in place
  double* episode_return_acc = nullptr;  // running return of the open episode
  std::function<void(int, const Vector&, const Vector&, double, bool)> on_step;  // optional dump
  std::function<Vector(const Vector&)> obs_filter;  // optional normalization of raw observations
};

// Collects T steps. Truncated episodes get gamma*V(next) folded into their
// final reward so compute_gae can treat every done uniformly; terminated
// episodes do not bootstrap.
RolloutBuffer collect_rollout(RolloutCtx& ctx, int T, int H);

}  // namespace kippo
