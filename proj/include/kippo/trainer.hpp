#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>

#include "kippo/agent.hpp"
#include "kippo/config.hpp"
#include "kippo/env.hpp"
#include "kippo/koopman.hpp"
#include "kippo/metrics.hpp"
#include "kippo/rollout.hpp"

namespace kippo {

// One metrics row. NaN marks "not applicable" and serializes as an empty CSV
// field (baseline runs have no representation losses or CTE).
struct UpdateRecord {
  long update_index = 0;
  long global_step = 0;
  double ep_return_mean = NAN;
  double ewma = NAN;
  double l_rec = NAN;
  double l_ls = NAN;
  double l_ss = NAN;
  double l_ppo_policy = NAN;
  double l_ppo_value = NAN;
  double entropy = NAN;
  double cte_value = NAN;
  double wall_time_s = 0.0;
  double probe_drift = NAN;
};

struct TrainResult {
  std::vector<UpdateRecord> records;
  long env_steps = 0;
  std::string out_dir;
  std::string checkpoint_path;
};

class Trainer;

struct TrainHooks {
  // Runs after model construction; fixtures use it to install hand-set weights.
  std::function<void(Trainer&)> post_init;
  // Runs after every update; returning false stops the run early.
  std::function<bool(Trainer&, const UpdateRecord&)> post_update;
};

// Running per-dimension mean/variance normalizer (optional, off by default).
struct RunningNorm {
  Vector mean, var;
  double count = 0.0;
  void init(int dim);
  void update(const Vector& x);
  Vector normalize(const Vector& x) const;
};

// Alternating rollout/optimization loop. Each update collects rollout_len
// steps, then runs `epochs` passes of `num_minibatches` minibatches; every
// minibatch takes one Adam step on the combined objective: weighted
// representation losses plus the PPO loss on detached latents. Randomness is
// drawn from named substreams of the run seed (env, init, action sampling,
// shuffling, evaluation), so ablating one consumer leaves the others intact.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg, TrainHooks hooks = {});

  TrainResult run();
  UpdateRecord run_update();
  bool finished() const { return update_index_ >= num_updates_; }

  RolloutBuffer collect_phase();

  struct OptStats {
    // per-epoch means over minibatches
    std::vector<double> lrec, lls, lss, pg, v, ent, lki;
  };
  OptStats optimize_phase(const RolloutBuffer& buf, const GaeOutput& gae);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  // accessors (hooks and tests)
  const TrainConfig& config() const { return cfg_; }
  Env& env() { return *env_; }
  KoopmanModel* koopman() { return koopman_ ? &*koopman_ : nullptr; }
  GaussianPolicy& policy() { return policy_; }
  ValueFunction& value_fn() { return value_fn_; }
  Adam& optimizer() { return *adam_; }
  std::vector<Tensor> trainable() const { return params_; }
  long update_index() const { return update_index_; }
  long num_updates() const { return num_updates_; }
  long env_steps() const { return static_cast<long>(update_index_) * cfg_.rollout_len; }
  double current_lr() const;
  double ewma() const { return ewma_init_ ? ewma_ : NAN; }
  int latent_dim() const { return koopman_ ? koopman_->latent_dim : env_->spec().state_dim; }

  // H-step state-space prediction error diagnostics on windows of `buf`.
  double eval_cte(const RolloutBuffer& buf, int max_windows);
  double eval_prediction_mse(const RolloutBuffer& buf, int max_windows);

 private:
  Vector encode_eval(const Vector& obs) const;
  void open_outputs();
  void write_metrics_row(const UpdateRecord& rec);
  void write_aux_row(const UpdateRecord& rec);
  void maybe_pick_probe(const RolloutBuffer& buf);
  double probe_drift_update();

  TrainConfig cfg_;
  TrainHooks hooks_;
  uint64_t cfg_hash_ = 0;
  std::unique_ptr<Env> env_;
  std::optional<KoopmanModel> koopman_;
  GaussianPolicy policy_;
  ValueFunction value_fn_;
  std::vector<Tensor> params_;
  std::unique_ptr<Adam> adam_;
  Rng action_rng_{0}, shuffle_rng_{0}, eval_rng_{0};
  Vector obs_;
  double ep_return_acc_ = 0.0;
  double ewma_ = 0.0;
  bool ewma_init_ = false;
  long update_index_ = 0;
  long num_updates_ = 0;
  RunningNorm obs_norm_;
  Matrix probe_;  // fixed encoder probe states
  bool probe_set_ = false;
  Matrix probe_prev_latents_;
  bool probe_prev_set_ = false;
  std::chrono::steady_clock::time_point start_time_;
  std::string metrics_path_, aux_path_, traj_path_;
  bool wrote_headers_ = false;
};

TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {});
// Resumes from a checkpoint written by an identical configuration.
TrainResult train_resume(const std::string& checkpoint_path, const TrainConfig& cfg,
                         const TrainHooks& hooks = {});

// Shuffles 0..T-1 and splits into num_minibatches equal chunks; every index
// appears exactly once per epoch.
std::vector<std::vector<int>> minibatch_partition(int T, int num_minibatches, Rng& rng);

// Fixed metrics.csv schema, in column order.
extern const char* const kMetricsHeader;

}  // namespace kippo
