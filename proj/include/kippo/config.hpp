#pragma once

#include <map>
#include <string>
#include <vector>

#include "kippo/common.hpp"

namespace kippo {

// Full configuration of one training run. Serializes to flat INI-style text
// (sections of key = value); file values are overridden key-by-key from the
// command line. Unknown keys are rejected by name.
struct TrainConfig {
  // [run]
  std::string env = "pendulum";
  long seed = 1;
  long total_steps = 1'000'000;
  bool kippo = true;
  std::string out_dir = "";
  bool dump_trajectories = false;

  // [rollout]
  int rollout_len = 2048;  // T
  int horizon = 8;         // H

  // [optim]
  int num_minibatches = 32;
  int epochs = 10;
  double lr = 3e-4;
  bool lr_decay = true;  // linear to 0 over the run
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-5;
  double max_grad_norm = 0.5;

  // [ppo]
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double pg_coef = 1.0;
  bool norm_adv = true;
  bool clip_vloss = true;

  // [kippo]
  int latent_dim = 0;         // 0 = auto
  int action_latent_dim = 0;  // 0 = auto
  double w_rec = 0.5;
  double w_ls = 0.25;
  double w_ss = 0.5;
  int enc_hidden_layers = 2;
  int enc_hidden_width = 128;
  bool mask_norm_sum = false;  // divide prediction losses by unmasked count instead of H

  // [agent]
  int agent_hidden_layers = 2;
  int agent_hidden_width = 64;

  // [metrics]
  double ewma_alpha = 0.05;
  bool ewma_swapped = false;
  int cte_windows = 32;
  int probe_batch = 64;

  // [trainer]
  bool obs_norm = false;  // running-statistics observation normalization

  // [env] free-form numeric overrides passed to the environment factory
  std::map<std::string, double> env_params;

  std::vector<int> encoder_hidden() const;
  std::vector<int> agent_hidden() const;
};

// Throws ConfigError on violated constraints (divisibility, ranges, names).
void validate(const TrainConfig& cfg);

// Canonical INI serialization: fixed section/key order, exact numeric fields.
std::string serialize_config(const TrainConfig& cfg);
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);

// Applies "section.key=value" overrides in order; returns log lines.
std::vector<std::string> apply_overrides(TrainConfig& cfg,
                                         const std::vector<std::string>& overrides);

uint64_t config_hash(const TrainConfig& cfg);

}  // namespace kippo
