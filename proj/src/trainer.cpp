#include "kippo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kippo/io.hpp"

namespace kippo {

const char* const kMetricsHeader =
    "global_step,episodic_return_mean,ewma,L_rec,L_ls,L_ss,L_ppo_policy,L_ppo_value,entropy,"
    "cte,wall_time_s";

namespace {

std::string field(double v) { return std::isnan(v) ? "" : format_double(v); }

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return NAN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void RunningNorm::init(int dim) {
  mean = Vector::Zero(dim);
  var = Vector::Ones(dim);
  count = 1e-4;
}

void RunningNorm::update(const Vector& x) {
  // Welford-style batch-of-one merge
  double new_count = count + 1.0;
  Vector delta = x - mean;
  Vector new_mean = mean + delta / new_count;
  Vector m_a = var * count;
  Vector m_b = delta.cwiseProduct(x - new_mean);
  var = (m_a + m_b) / new_count;
  mean = new_mean;
  count = new_count;
}

Vector RunningNorm::normalize(const Vector& x) const {
  return (x - mean).cwiseQuotient((var.array() + 1e-8).sqrt().matrix());
}

Trainer::Trainer(TrainConfig cfg, TrainHooks hooks) : cfg_(std::move(cfg)), hooks_(std::move(hooks)) {
  validate(cfg_);
  cfg_hash_ = config_hash(cfg_);
  env_ = make_env(cfg_.env, cfg_.env_params);
  const EnvSpec& spec = env_->spec();

  Rng root(static_cast<uint64_t>(cfg_.seed));
  Rng env_seed_rng = root.split("env");
  action_rng_ = root.split("action");
  shuffle_rng_ = root.split("shuffle");
  eval_rng_ = root.split("eval");

  if (cfg_.kippo) {
    KoopmanConfig kc;
    kc.state_dim = spec.state_dim;
    kc.action_dim = spec.action_dim;
    kc.latent_dim = cfg_.latent_dim;
    kc.action_latent_dim = cfg_.action_latent_dim;
    kc.hidden = cfg_.encoder_hidden();
    koopman_ = KoopmanModel::make(kc, root);
  }
  int agent_in = cfg_.kippo ? koopman_->latent_dim : spec.state_dim;
  Rng actor_rng = root.split("init/actor");
  Rng critic_rng = root.split("init/critic");
  policy_ = GaussianPolicy::make(agent_in, spec.action_dim, cfg_.agent_hidden(), actor_rng);
  value_fn_ = ValueFunction::make(agent_in, cfg_.agent_hidden(), critic_rng);

  if (koopman_) params_ = koopman_->parameters();
  for (const auto& p : policy_.parameters()) params_.push_back(p);
  for (const auto& p : value_fn_.parameters()) params_.push_back(p);
  AdamConfig ac;
  ac.lr = cfg_.lr;
  ac.beta1 = cfg_.adam_beta1;
  ac.beta2 = cfg_.adam_beta2;
  ac.eps = cfg_.adam_eps;
  adam_ = std::make_unique<Adam>(params_, ac);

  num_updates_ = (cfg_.total_steps + cfg_.rollout_len - 1) / cfg_.rollout_len;
  if (cfg_.obs_norm) obs_norm_.init(spec.state_dim);

  if (hooks_.post_init) hooks_.post_init(*this);

  obs_ = env_->reset(env_seed_rng.next_u64());
  if (cfg_.obs_norm) {
    obs_norm_.update(obs_);
    obs_ = obs_norm_.normalize(obs_);
  }
  start_time_ = std::chrono::steady_clock::now();
  open_outputs();
}

double Trainer::current_lr() const {
  if (!cfg_.lr_decay) return cfg_.lr;
  double frac = 1.0 - static_cast<double>(update_index_) / static_cast<double>(num_updates_);
  return cfg_.lr * frac;
}

Vector Trainer::encode_eval(const Vector& obs) const {
  if (!koopman_) return obs;
  return koopman_->encode_state_eval(obs.transpose()).row(0).transpose();
}

void Trainer::open_outputs() {
  if (cfg_.out_dir.empty()) return;
  ensure_dir(cfg_.out_dir);
  metrics_path_ = cfg_.out_dir + "/metrics.csv";
  aux_path_ = cfg_.out_dir + "/aux.csv";
  {
    std::ofstream m(metrics_path_, std::ios::trunc);
    m << kMetricsHeader << '\n';
    std::ofstream a(aux_path_, std::ios::trunc);
    a << "update,global_step,probe_drift,lr\n";
  }
  if (cfg_.dump_trajectories) {
    traj_path_ = cfg_.out_dir + "/trajectories.csv";
    std::ofstream t(traj_path_, std::ios::trunc);
    t << "step";
    for (int i = 0; i < env_->spec().state_dim; ++i) t << ",s" << i;
    for (int i = 0; i < env_->spec().action_dim; ++i) t << ",a" << i;
    t << ",reward,done\n";
  }
  atomic_write(cfg_.out_dir + "/resolved_config.ini",
               "# config_hash " + to_hex(cfg_hash_) + "\n" + serialize_config(cfg_));
  wrote_headers_ = true;
}

void Trainer::write_metrics_row(const UpdateRecord& r) {
  if (metrics_path_.empty()) return;
  std::ofstream m(metrics_path_, std::ios::app);
  m << r.global_step << ',' << field(r.ep_return_mean) << ',' << field(r.ewma) << ','
    << field(r.l_rec) << ',' << field(r.l_ls) << ',' << field(r.l_ss) << ','
    << field(r.l_ppo_policy) << ',' << field(r.l_ppo_value) << ',' << field(r.entropy) << ','
    << field(r.cte_value) << ',' << format_double(r.wall_time_s) << '\n';
}

void Trainer::write_aux_row(const UpdateRecord& r) {
  if (aux_path_.empty()) return;
  std::ofstream a(aux_path_, std::ios::app);
  a << r.update_index << ',' << r.global_step << ',' << field(r.probe_drift) << ','
    << format_double(current_lr()) << '\n';
}

RolloutBuffer Trainer::collect_phase() {
  std::ofstream traj;
  if (!traj_path_.empty()) traj.open(traj_path_, std::ios::app);
  long base_step = env_steps();

  RolloutCtx ctx{*env_,
                 koopman_ ? &*koopman_ : nullptr,
                 policy_,
                 value_fn_,
                 action_rng_,
                 cfg_.gamma,
                 &obs_,
                 &ep_return_acc_,
                 {}};
  if (traj.is_open()) {
    ctx.on_step = [&](int t, const Vector& s, const Vector& a, double r, bool done) {
      traj << base_step + t;
      for (Index i = 0; i < s.size(); ++i) traj << ',' << format_double(s[i]);
      for (Index i = 0; i < a.size(); ++i) traj << ',' << format_double(a[i]);
      traj << ',' << format_double(r) << ',' << (done ? 1 : 0) << '\n';
    };
  }
  if (cfg_.obs_norm) {
    ctx.obs_filter = [this](const Vector& raw) {
      obs_norm_.update(raw);
      return obs_norm_.normalize(raw);
    };
  }
  return collect_rollout(ctx, cfg_.rollout_len, cfg_.horizon);
}

Trainer::OptStats Trainer::optimize_phase(const RolloutBuffer& buf, const GaeOutput& gae) {
  const int T = cfg_.rollout_len;
  const int B = T / cfg_.num_minibatches;
  const bool rep_active = koopman_ && (cfg_.w_rec > 0 || cfg_.w_ls > 0 || cfg_.w_ss > 0);
  adam_->set_lr(current_lr());

  PpoConfig pc;
  pc.clip_eps = cfg_.clip_eps;
  pc.vf_coef = cfg_.vf_coef;
  pc.ent_coef = cfg_.ent_coef;
  pc.pg_coef = cfg_.pg_coef;
  pc.norm_adv = cfg_.norm_adv;
  pc.clip_vloss = cfg_.clip_vloss;

  OptStats stats;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::vector<std::vector<int>> partition = minibatch_partition(T, cfg_.num_minibatches, shuffle_rng_);
    std::vector<double> e_lrec, e_lls, e_lss, e_pg, e_v, e_ent, e_lki;
    for (int mb = 0; mb < cfg_.num_minibatches; ++mb) {
      const std::vector<int>& rows = partition[static_cast<size_t>(mb)];
      Matrix X(B, buf.states.cols());
      PpoBatch pb;
      pb.actions.resize(B, buf.actions.cols());
      pb.old_log_prob.resize(B);
      pb.advantages.resize(B);
      pb.returns.resize(B);
      pb.old_values.resize(B);
      for (int i = 0; i < B; ++i) {
        int r = rows[static_cast<size_t>(i)];
        X.row(i) = buf.states.row(r);
        pb.actions.row(i) = buf.actions.row(r);
        pb.old_log_prob[i] = buf.log_probs[r];
        pb.advantages[i] = gae.advantages[r];
        pb.returns[i] = gae.returns[r];
        pb.old_values[i] = buf.values[r];
      }

      Tensor latents;
      Tensor lrec, lls, lss;
      if (koopman_) {
        Tensor X_t = Tensor::constant(X);
        Tensor encoded = koopman_->encode_state(X_t);
        lrec = mean_all(square(sub(koopman_->decode_state(encoded), X_t)));
        SequenceBatch seq = buf.gather_windows(rows);
        PredictionLosses pl = prediction_losses(*koopman_, seq, cfg_.mask_norm_sum);
        lls = pl.latent;
        lss = pl.state;
        latents = encoded.detach();
      } else {
        latents = Tensor::constant(X);
      }

      PpoLoss ppo = ppo_loss(policy_, value_fn_, latents, pb, pc);

      std::string where = "update " + std::to_string(update_index_) + " epoch " +
                          std::to_string(epoch) + " minibatch " + std::to_string(mb);
      check_finite(ppo.policy, "PPO policy loss at " + where);
      check_finite(ppo.value, "PPO value loss at " + where);
      double lki_val = NAN;
      Tensor total = ppo.total;
      if (koopman_) {
        check_finite(lrec, "reconstruction loss at " + where);
        check_finite(lls, "latent prediction loss at " + where);
        check_finite(lss, "state prediction loss at " + where);
        lki_val = cfg_.w_rec * lrec.item() + cfg_.w_ls * lls.item() + cfg_.w_ss * lss.item();
        if (rep_active) {
          // only positive-weight terms enter the graph
          Tensor lki;
          auto push = [&](const Tensor& t, double w) {
            if (w <= 0) return;
            Tensor term = scale(t, w);
            lki = lki.defined() ? add(lki, term) : term;
          };
          push(lrec, cfg_.w_rec);
          push(lls, cfg_.w_ls);
          push(lss, cfg_.w_ss);
          total = add(lki, total);
        }
      }

      adam_->zero_grad();
      total.backward();
      clip_global_grad_norm(params_, cfg_.max_grad_norm);
      adam_->step();

      if (koopman_) {
        e_lrec.push_back(lrec.item());
        e_lls.push_back(lls.item());
        e_lss.push_back(lss.item());
        e_lki.push_back(lki_val);
      }
      e_pg.push_back(ppo.policy.item());
      e_v.push_back(ppo.value.item());
      e_ent.push_back(ppo.entropy.item());
    }
    if (koopman_) {
      stats.lrec.push_back(mean_of(e_lrec));
      stats.lls.push_back(mean_of(e_lls));
      stats.lss.push_back(mean_of(e_lss));
      stats.lki.push_back(mean_of(e_lki));
    }
    stats.pg.push_back(mean_of(e_pg));
    stats.v.push_back(mean_of(e_v));
    stats.ent.push_back(mean_of(e_ent));
  }
  return stats;
}

void Trainer::maybe_pick_probe(const RolloutBuffer& buf) {
  if (!koopman_ || probe_set_) return;
  int n = std::min(cfg_.probe_batch, buf.T);
  std::vector<int> idx(static_cast<size_t>(buf.T));
  for (int i = 0; i < buf.T; ++i) idx[static_cast<size_t>(i)] = i;
  shuffle_indices(idx, eval_rng_);
  probe_.resize(n, buf.states.cols());
  for (int i = 0; i < n; ++i) probe_.row(i) = buf.states.row(idx[static_cast<size_t>(i)]);
  probe_set_ = true;
}

double Trainer::probe_drift_update() {
  if (!koopman_ || !probe_set_) return NAN;
  Matrix cur = koopman_->encode_state_eval(probe_);
  double drift = NAN;
  if (probe_prev_set_) drift = (cur - probe_prev_latents_).cwiseAbs().mean();
  probe_prev_latents_ = std::move(cur);
  probe_prev_set_ = true;
  return drift;
}

double Trainer::eval_cte(const RolloutBuffer& buf, int max_windows) {
  if (!koopman_) return NAN;
  std::vector<int> valid = buf.fully_valid_windows();
  if (valid.empty()) return NAN;
  shuffle_indices(valid, eval_rng_);
  int n = std::min<int>(max_windows, static_cast<int>(valid.size()));
  const int H = buf.H;
  double acc = 0.0;
  for (int w = 0; w < n; ++w) {
    int t = valid[static_cast<size_t>(w)];
    Matrix x0 = buf.state_windows[0].row(t);
    Matrix y = koopman_->encode_state_eval(x0);
    Matrix pred(H, buf.states.cols());
    Matrix truth(H, buf.states.cols());
    for (int h = 0; h < H; ++h) {
      Matrix u = buf.action_windows[static_cast<size_t>(h)].row(t);
      Matrix v = koopman_->encode_action_eval(u);
      y = y * koopman_->transition.value().transpose() + v * koopman_->control.value().transpose();
      pred.row(h) = koopman_->decode_state_eval(y).row(0);
      truth.row(h) = buf.state_windows[static_cast<size_t>(h + 1)].row(t);
    }
    acc += cte(pred, truth);
  }
  return acc / n;
}

double Trainer::eval_prediction_mse(const RolloutBuffer& buf, int max_windows) {
  if (!koopman_) return NAN;
  std::vector<int> valid = buf.fully_valid_windows();
  if (valid.empty()) return NAN;
  int n = std::min<int>(max_windows, static_cast<int>(valid.size()));
  const int H = buf.H;
  double acc = 0.0;
  long count = 0;
  for (int w = 0; w < n; ++w) {
    int t = valid[static_cast<size_t>(w)];
    Matrix y = koopman_->encode_state_eval(Matrix(buf.state_windows[0].row(t)));
    for (int h = 0; h < H; ++h) {
      Matrix u = buf.action_windows[static_cast<size_t>(h)].row(t);
      Matrix v = koopman_->encode_action_eval(u);
      y = y * koopman_->transition.value().transpose() + v * koopman_->control.value().transpose();
      Matrix err = koopman_->decode_state_eval(y).row(0) -
                   buf.state_windows[static_cast<size_t>(h + 1)].row(t);
      acc += err.array().square().sum();
      count += err.size();
    }
  }
  return acc / static_cast<double>(count);
}

UpdateRecord Trainer::run_update() {
  RolloutBuffer buf = collect_phase();
  maybe_pick_probe(buf);
  GaeOutput gae =
      compute_gae(buf.rewards, buf.values, buf.dones, buf.bootstrap_value, cfg_.gamma,
                  cfg_.gae_lambda);
  OptStats stats = optimize_phase(buf, gae);

  UpdateRecord rec;
  rec.update_index = update_index_;
  rec.global_step = env_steps() + cfg_.rollout_len;

  if (!buf.episode_returns.empty()) {
    double s = 0.0;
    for (double g : buf.episode_returns) s += g;
    // G_t is the update's expected-return estimate: the mean episodic return
    // of the rollout. Updates without a completed episode leave the average.
    double g_mean = s / static_cast<double>(buf.episode_returns.size());
    rec.ep_return_mean = g_mean;
    if (!ewma_init_) {
      ewma_ = g_mean;
      ewma_init_ = true;
    } else {
      ewma_ = ewma_update(ewma_, g_mean, cfg_.ewma_alpha, cfg_.ewma_swapped);
    }
  }
  if (ewma_init_) rec.ewma = ewma_;

  rec.l_rec = mean_of(stats.lrec);
  rec.l_ls = mean_of(stats.lls);
  rec.l_ss = mean_of(stats.lss);
  rec.l_ppo_policy = mean_of(stats.pg);
  rec.l_ppo_value = mean_of(stats.v);
  rec.entropy = mean_of(stats.ent);
  rec.cte_value = koopman_ ? eval_cte(buf, cfg_.cte_windows) : NAN;
  rec.probe_drift = probe_drift_update();
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time_).count();

  ++update_index_;
  write_metrics_row(rec);
  write_aux_row(rec);
  return rec;
}

TrainResult Trainer::run() {
  TrainResult out;
  try {
    while (!finished()) {
      UpdateRecord rec = run_update();
      out.records.push_back(rec);
      if (hooks_.post_update && !hooks_.post_update(*this, rec)) break;
    }
  } catch (const NanAbort& e) {
    if (!cfg_.out_dir.empty())
      atomic_write(cfg_.out_dir + "/abort.txt",
                   std::string("run aborted: ") + e.what() + "\nenv_steps " +
                       std::to_string(env_steps()) + "\n");
    throw;
  }
  out.env_steps = env_steps();
  out.out_dir = cfg_.out_dir;
  if (!cfg_.out_dir.empty()) {
    out.checkpoint_path = cfg_.out_dir + "/checkpoint.txt";
    save_checkpoint(out.checkpoint_path);
  }
  return out;
}

// --- checkpointing -----------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "kippo-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_matrix(std::ostringstream& ss, const Matrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      ss << (r == 0 && c == 0 ? "" : " ") << format_double(m(r, c));
    }
  ss << '\n';
}

Matrix read_matrix(std::istream& in, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      std::string tok;
      if (!(in >> tok)) throw SchemaError("checkpoint: truncated matrix data");
      m(r, c) = parse_double(tok);
    }
  return m;
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  std::ostringstream ss;
  ss << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  ss << "config_hash " << to_hex(cfg_hash_) << '\n';
  ss << "update_index " << update_index_ << '\n';
  ss << "ewma_init " << (ewma_init_ ? 1 : 0) << '\n';
  ss << "ewma " << format_double(ewma_) << '\n';
  ss << "ep_return_acc " << format_double(ep_return_acc_) << '\n';
  ss << "obs " << obs_.size();
  for (Index i = 0; i < obs_.size(); ++i) ss << ' ' << format_double(obs_[i]);
  ss << '\n';
  auto rng_line = [&](const char* name, const Rng& r) {
    ss << "rng " << name << ' ' << r.key() << ' ' << r.counter() << '\n';
  };
  rng_line("action", action_rng_);
  rng_line("shuffle", shuffle_rng_);
  rng_line("eval", eval_rng_);
  EnvState es = env_->save_state();
  ss << "env " << es.reals.size() << ' ' << es.ints.size() << '\n';
  for (size_t i = 0; i < es.reals.size(); ++i)
    ss << (i ? " " : "") << format_double(es.reals[i]);
  ss << '\n';
  for (size_t i = 0; i < es.ints.size(); ++i) ss << (i ? " " : "") << es.ints[i];
  ss << '\n';
  ss << "probe " << (probe_set_ ? 1 : 0) << '\n';
  if (probe_set_) {
    ss << "probe_data " << probe_.rows() << ' ' << probe_.cols() << '\n';
    write_matrix(ss, probe_);
  }
  ss << "obsnorm " << (cfg_.obs_norm ? 1 : 0) << '\n';
  if (cfg_.obs_norm) {
    ss << format_double(obs_norm_.count) << '\n';
    write_matrix(ss, obs_norm_.mean.transpose());
    write_matrix(ss, obs_norm_.var.transpose());
  }
  ss << "adam_steps " << adam_->step_count() << '\n';
  for (size_t i = 0; i < params_.size(); ++i) {
    const Tensor& p = params_[i];
    ss << "param " << p.name() << ' ' << p.rows() << ' ' << p.cols() << '\n';
    write_matrix(ss, p.value());
    const Adam::Slot& slot = adam_->slots()[i];
    ss << "adam " << p.name() << '\n';
    write_matrix(ss, slot.m);
    write_matrix(ss, slot.v);
  }
  ss << "end\n";
  atomic_write(path, ss.str());
}

void Trainer::load_checkpoint(const std::string& path) {
  std::istringstream in(slurp(path));
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic)
    throw SchemaError("checkpoint: not a checkpoint file: " + path);
  if (version != kCheckpointVersion)
    throw SchemaError("checkpoint: version mismatch, file has " + std::to_string(version) +
                      ", this build expects " + std::to_string(kCheckpointVersion));

  auto expect = [&](const char* token) {
    std::string t;
    if (!(in >> t) || t != token)
      throw SchemaError("checkpoint: expected '" + std::string(token) + "', got '" + t + "'");
  };

  // Parse everything into staging storage before touching live state.
  expect("config_hash");
  std::string hash_hex;
  in >> hash_hex;
  if (hash_hex != to_hex(cfg_hash_))
    throw SchemaError("checkpoint: config hash " + hash_hex + " does not match this run's " +
                      to_hex(cfg_hash_));
  long staged_update = 0;
  expect("update_index");
  in >> staged_update;
  int staged_ewma_init = 0;
  expect("ewma_init");
  in >> staged_ewma_init;
  std::string tok;
  expect("ewma");
  in >> tok;
  double staged_ewma = parse_double(tok);
  expect("ep_return_acc");
  in >> tok;
  double staged_acc = parse_double(tok);
  expect("obs");
  Index obs_n = 0;
  in >> obs_n;
  Vector staged_obs(obs_n);
  for (Index i = 0; i < obs_n; ++i) {
    in >> tok;
    staged_obs[i] = parse_double(tok);
  }
  auto read_rng = [&](const char* name) {
    expect("rng");
    expect(name);
    uint64_t key = 0, counter = 0;
    in >> key >> counter;
    return Rng::restore(key, counter);
  };
  Rng staged_action = read_rng("action");
  Rng staged_shuffle = read_rng("shuffle");
  Rng staged_eval = read_rng("eval");
  expect("env");
  size_t nreals = 0, nints = 0;
  in >> nreals >> nints;
  EnvState staged_env;
  staged_env.reals.resize(nreals);
  staged_env.ints.resize(nints);
  for (auto& v : staged_env.reals) {
    in >> tok;
    v = parse_double(tok);
  }
  for (auto& v : staged_env.ints) in >> v;
  expect("probe");
  int probe_flag = 0;
  in >> probe_flag;
  Matrix staged_probe;
  if (probe_flag) {
    expect("probe_data");
    Index pr = 0, pc = 0;
    in >> pr >> pc;
    staged_probe = read_matrix(in, pr, pc);
  }
  expect("obsnorm");
  int obsnorm_flag = 0;
  in >> obsnorm_flag;
  if (obsnorm_flag != (cfg_.obs_norm ? 1 : 0))
    throw SchemaError("checkpoint: observation-normalization flag mismatch");
  RunningNorm staged_norm;
  if (obsnorm_flag) {
    in >> tok;
    staged_norm.count = parse_double(tok);
    staged_norm.mean = read_matrix(in, 1, env_->spec().state_dim).row(0).transpose();
    staged_norm.var = read_matrix(in, 1, env_->spec().state_dim).row(0).transpose();
  }
  expect("adam_steps");
  long staged_adam_steps = 0;
  in >> staged_adam_steps;

  std::vector<Matrix> staged_params, staged_m, staged_v;
  for (const auto& p : params_) {
    expect("param");
    std::string name;
    Index rows = 0, cols = 0;
    in >> name >> rows >> cols;
    if (name != p.name() || rows != p.rows() || cols != p.cols())
      throw SchemaError("checkpoint: parameter mismatch, file has '" + name + "' " +
                        shape_str(rows, cols) + ", model expects '" + p.name() + "' " +
                        shape_str(p.rows(), p.cols()));
    staged_params.push_back(read_matrix(in, rows, cols));
    expect("adam");
    expect(p.name().c_str());
    staged_m.push_back(read_matrix(in, rows, cols));
    staged_v.push_back(read_matrix(in, rows, cols));
  }
  expect("end");

  // Apply.
  update_index_ = staged_update;
  ewma_init_ = staged_ewma_init != 0;
  ewma_ = staged_ewma;
  ep_return_acc_ = staged_acc;
  obs_ = staged_obs;
  action_rng_ = staged_action;
  shuffle_rng_ = staged_shuffle;
  eval_rng_ = staged_eval;
  env_->set_env_state(staged_env);
  probe_set_ = probe_flag != 0;
  if (probe_set_) {
    probe_ = staged_probe;
    if (koopman_) {
      probe_prev_latents_ = koopman_->encode_state_eval(probe_);
      probe_prev_set_ = true;
    }
  }
  if (obsnorm_flag) obs_norm_ = staged_norm;
  adam_->set_step_count(staged_adam_steps);
  for (size_t i = 0; i < params_.size(); ++i) {
    params_[i].raw_value() = staged_params[i];
    adam_->slots()[i].m = staged_m[i];
    adam_->slots()[i].v = staged_v[i];
  }
}

std::vector<std::vector<int>> minibatch_partition(int T, int num_minibatches, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) idx[static_cast<size_t>(i)] = i;
  shuffle_indices(idx, rng);
  int B = T / num_minibatches;
  std::vector<std::vector<int>> out;
  for (int mb = 0; mb < num_minibatches; ++mb)
    out.emplace_back(idx.begin() + static_cast<long>(mb) * B,
                     idx.begin() + static_cast<long>(mb + 1) * B);
  return out;
}

TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks) {
  Trainer trainer(cfg, hooks);
  return trainer.run();
}

TrainResult train_resume(const std::string& checkpoint_path, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
  Trainer trainer(cfg, hooks);
  trainer.load_checkpoint(checkpoint_path);
  return trainer.run();
}

}  // namespace kippo
