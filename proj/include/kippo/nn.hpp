#pragma once

#include <string>
#include <vector>

#include "kippo/rng.hpp"
#include "kippo/tensor.hpp"

namespace kippo {

enum class InitKind { xavier_uniform, orthogonal, zeros };

// Dense initializer. xavier_uniform samples U(-a, a) with a = sqrt(6/(rows+cols));
// orthogonal (square only) returns Q with Q^T Q = I to 1e-8; zeros is all-zero.
Tensor init_matrix(InitKind kind, Index rows, Index cols, Rng& rng, std::string name = "");

// Optional exact input lifting. `quadratic` appends elementwise squares of the
// inputs before the first layer; it exists so test fixtures can realize
// polynomial observables exactly. Production networks use `none`.
enum class FeatureMap { none, quadratic };

// Multilayer perceptron: tanh on hidden layers, identity on the output layer.
// Weight matrices are stored fan_in x fan_out and applied to row-batched input.
class Mlp {
 public:
  struct Layer {
    Tensor W;  // in x out
    Tensor b;  // 1 x out
  };

  Mlp() = default;
  static Mlp make(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng,
                  const std::string& name, FeatureMap fm = FeatureMap::none);

  // Tape forward. Records the graph whenever a parameter requires grad.
  Tensor forward(const Tensor& x) const;
  // Plain forward without graph recording, for rollouts and evaluation.
  Matrix eval(const Matrix& x) const;

  std::vector<Tensor> parameters() const;
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  FeatureMap feature_map() const { return feature_map_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const std::string& name() const { return name_; }

 private:
  void check_input(Index cols) const;
  std::vector<Layer> layers_;
  FeatureMap feature_map_ = FeatureMap::none;
  int input_dim_ = 0;
  int output_dim_ = 0;
  std::string name_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

// Bias-corrected Adam over a fixed parameter list. All parameters share one
// step counter; moment buffers match parameter shapes.
class Adam {
 public:
  struct Slot {
    Matrix m, v;
  };

  Adam(std::vector<Tensor> params, AdamConfig cfg);
  void step();       // contract error when a parameter has no gradient buffer
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }
  void set_step_count(long t) { step_ = t; }

 private:
  std::vector<Tensor> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  long step_ = 0;
};

// Scales all gradients so their joint L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
double clip_global_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace kippo
