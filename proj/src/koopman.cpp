#include "kippo/koopman.hpp"

#include <algorithm>

namespace kippo {

int default_latent_dim(int state_dim) { return std::clamp(4 * state_dim, 8, 48); }

int default_action_latent_dim(int action_dim) { return std::max(4, 2 * action_dim); }

KoopmanModel KoopmanModel::make(const KoopmanConfig& cfg, Rng& root) {
  if (cfg.state_dim < 1 || cfg.action_dim < 1)
    throw ContractError("koopman: state/action dimensions must be positive");
  KoopmanModel m;
  m.latent_dim = cfg.latent_dim > 0 ? cfg.latent_dim : default_latent_dim(cfg.state_dim);
  m.action_latent_dim =
      cfg.action_latent_dim > 0 ? cfg.action_latent_dim : default_action_latent_dim(cfg.action_dim);
  if (m.latent_dim < cfg.state_dim)
    throw ContractError("koopman: latent dimension " + std::to_string(m.latent_dim) +
                        " must be >= state dimension " + std::to_string(cfg.state_dim));
  Rng enc_rng = root.split("init/state_encoder");
  Rng dec_rng = root.split("init/state_decoder");
  Rng act_rng = root.split("init/action_encoder");
  Rng kx_rng = root.split("init/transition");
  m.state_encoder = Mlp::make(cfg.state_dim, cfg.hidden, m.latent_dim, enc_rng, "state_encoder",
                              cfg.encoder_features);
  m.state_decoder = Mlp::make(m.latent_dim, cfg.hidden, cfg.state_dim, dec_rng, "state_decoder");
  m.action_encoder =
      Mlp::make(cfg.action_dim, cfg.hidden, m.action_latent_dim, act_rng, "action_encoder");
  m.transition = init_matrix(InitKind::orthogonal, m.latent_dim, m.latent_dim, kx_rng, "transition");
  m.control = init_matrix(InitKind::zeros, m.latent_dim, m.action_latent_dim, kx_rng, "control");

  const Matrix& kx = m.transition.value();
  double defect =
      (kx.transpose() * kx - Matrix::Identity(m.latent_dim, m.latent_dim)).cwiseAbs().maxCoeff();
  if (defect > 1e-8)
    throw ContractError("koopman: transition matrix not orthogonal at construction");
  if (m.control.value().cwiseAbs().maxCoeff() != 0.0)
    throw ContractError("koopman: control matrix not zero at construction");
  return m;
}

std::vector<Tensor> KoopmanModel::parameters() const {
  std::vector<Tensor> out = state_encoder.parameters();
  for (const auto& p : state_decoder.parameters()) out.push_back(p);
  for (const auto& p : action_encoder.parameters()) out.push_back(p);
  out.push_back(transition);
  out.push_back(control);
  return out;
}

Tensor KoopmanModel::encode_state(const Tensor& x) const {
  if (!x.value().allFinite()) throw ContractError("encode_state: non-finite input state");
  return state_encoder.forward(x);
}

Tensor KoopmanModel::decode_state(const Tensor& y) const { return state_decoder.forward(y); }

Tensor KoopmanModel::encode_action(const Tensor& u) const { return action_encoder.forward(u); }

Matrix KoopmanModel::encode_state_eval(const Matrix& x) const {
  if (!x.allFinite()) throw ContractError("encode_state: non-finite input state");
  return state_encoder.eval(x);
}

Matrix KoopmanModel::decode_state_eval(const Matrix& y) const { return state_decoder.eval(y); }

Matrix KoopmanModel::encode_action_eval(const Matrix& u) const { return action_encoder.eval(u); }

PredictionBatch predict_latent_sequence(const KoopmanModel& model, const Tensor& y0,
                                        const std::vector<Tensor>& actions) {
  if (actions.empty()) throw ContractError("predict_latent_sequence: horizon must be >= 1");
  if (y0.cols() != model.latent_dim)
    throw ShapeError("predict_latent_sequence: y0 width " + std::to_string(y0.cols()) +
                     " vs latent dimension " + std::to_string(model.latent_dim));
  PredictionBatch out;
  out.y0 = y0;
  Tensor y = y0;
  for (const auto& u : actions) {
    Tensor v = model.encode_action(u);
    out.encoded_actions.push_back(v);
    y = add(matmul_transB(y, model.transition), matmul_transB(v, model.control));
    out.predicted.push_back(y);
  }
  return out;
}

Tensor loss_reconstruction(const KoopmanModel& model, const Tensor& states) {
  Tensor recon = model.decode_state(model.encode_state(states));
  return mean_all(square(sub(recon, states)));
}

namespace {

void check_sequence(const KoopmanModel& model, const SequenceBatch& seq) {
  int H = seq.horizon();
  if (H < 1) throw ContractError("prediction loss: horizon must be >= 1");
  if (seq.states.size() != static_cast<size_t>(H) + 1)
    throw ShapeError("prediction loss: expected H+1 state slabs");
  if (seq.masks.size() != static_cast<size_t>(H))
    throw ShapeError("prediction loss: expected H mask columns");
  Index B = seq.batch();
  for (const auto& s : seq.states)
    if (s.rows() != B || s.cols() != model.state_encoder.input_dim())
      throw ShapeError("prediction loss: bad state slab shape " + shape_str(s));
  for (const auto& a : seq.actions)
    if (a.rows() != B || a.cols() != model.action_encoder.input_dim())
      throw ShapeError("prediction loss: bad action slab shape " + shape_str(a));
  for (const auto& m : seq.masks)
    if (m.rows() != B || m.cols() != 1)
      throw ShapeError("prediction loss: bad mask shape " + shape_str(m));
}

struct UnrolledWindows {
  std::vector<Tensor> targets_latent;  // H of B x m, encoded true states
  std::vector<Tensor> predicted;       // H of B x m
  Tensor decoded_all;                  // (H*B) x state_dim, decoded predictions
  Index batch = 0;
};

// Encodes all window states in one pass, unrolls the latent dynamics, and
// optionally decodes every predicted latent in one pass.
UnrolledWindows unroll_windows(const KoopmanModel& model, const SequenceBatch& seq,
                               bool want_decode) {
  check_sequence(model, seq);
  int H = seq.horizon();
  Index B = seq.batch();
  Index sdim = seq.states[0].cols();
  Index adim = seq.actions[0].cols();

  Matrix all_states(static_cast<Index>(H + 1) * B, sdim);
  for (int j = 0; j <= H; ++j) all_states.middleRows(static_cast<Index>(j) * B, B) = seq.states[j];
  Tensor encoded_all = model.encode_state(Tensor::constant(std::move(all_states)));

  Matrix all_actions(static_cast<Index>(H) * B, adim);
  for (int h = 0; h < H; ++h) all_actions.middleRows(static_cast<Index>(h) * B, B) = seq.actions[h];
  Tensor actions_encoded = model.encode_action(Tensor::constant(std::move(all_actions)));

  UnrolledWindows out;
  out.batch = B;
  Tensor y = slice_rows(encoded_all, 0, B);
  for (int h = 1; h <= H; ++h) {
    out.targets_latent.push_back(slice_rows(encoded_all, static_cast<Index>(h) * B, B));
    Tensor v = slice_rows(actions_encoded, static_cast<Index>(h - 1) * B, B);
    y = add(matmul_transB(y, model.transition), matmul_transB(v, model.control));
    out.predicted.push_back(y);
  }
  if (want_decode) out.decoded_all = model.decode_state(concat_rows(out.predicted));
  return out;
}

Tensor masked_window_mean(const std::vector<Tensor>& per_step_err, const SequenceBatch& seq,
                          bool norm_by_valid) {
  int H = seq.horizon();
  Tensor acc;
  for (int h = 0; h < H; ++h) {
    Tensor term = mul(Tensor::constant(seq.masks[h]), per_step_err[h]);
    acc = h == 0 ? term : add(acc, term);
  }
  if (!norm_by_valid) return mean_all(scale(acc, 1.0 / H));
  Matrix valid = Matrix::Zero(seq.batch(), 1);
  for (int h = 0; h < H; ++h) valid += seq.masks[h];
  valid = valid.cwiseMax(1.0).cwiseInverse();
  return mean_all(mul(acc, Tensor::constant(std::move(valid))));
}

PredictionLosses losses_from(const KoopmanModel& model, const SequenceBatch& seq,
                             const UnrolledWindows& uw, bool want_latent, bool want_state,
                             bool norm_by_valid) {
  int H = seq.horizon();
  Index B = uw.batch;
  PredictionLosses out;
  if (want_latent) {
    std::vector<Tensor> err;
    for (int h = 0; h < H; ++h)
      err.push_back(row_mean(square(sub(uw.predicted[h], uw.targets_latent[h]))));
    out.latent = masked_window_mean(err, seq, norm_by_valid);
  }
  if (want_state) {
    std::vector<Tensor> err;
    for (int h = 0; h < H; ++h) {
      Tensor decoded = slice_rows(uw.decoded_all, static_cast<Index>(h) * B, B);
      err.push_back(row_mean(square(sub(decoded, Tensor::constant(seq.states[h + 1])))));
    }
    out.state = masked_window_mean(err, seq, norm_by_valid);
  }
  return out;
}

}  // namespace

Tensor loss_latent_prediction(const KoopmanModel& model, const SequenceBatch& seq,
                              bool norm_by_valid) {
  UnrolledWindows uw = unroll_windows(model, seq, false);
  return losses_from(model, seq, uw, true, false, norm_by_valid).latent;
}

Tensor loss_state_prediction(const KoopmanModel& model, const SequenceBatch& seq,
                             bool norm_by_valid) {
  UnrolledWindows uw = unroll_windows(model, seq, true);
  return losses_from(model, seq, uw, false, true, norm_by_valid).state;
}

PredictionLosses prediction_losses(const KoopmanModel& model, const SequenceBatch& seq,
                                   bool norm_by_valid) {
  UnrolledWindows uw = unroll_windows(model, seq, true);
  return losses_from(model, seq, uw, true, true, norm_by_valid);
}

Tensor loss_representation_total(const Tensor& rec, const Tensor& latent, const Tensor& state,
                                 double w_rec, double w_ls, double w_ss) {
  if (w_rec < 0 || w_ls < 0 || w_ss < 0)
    throw ContractError("loss_representation_total: weights must be non-negative");
  return add(add(scale(rec, w_rec), scale(latent, w_ls)), scale(state, w_ss));
}

}  // namespace kippo
