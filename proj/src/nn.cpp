#include "kippo/nn.hpp"

#include <cmath>

namespace kippo {

Tensor init_matrix(InitKind kind, Index rows, Index cols, Rng& rng, std::string name) {
  if (rows < 1 || cols < 1)
    throw ContractError("init_matrix: dimensions must be positive, got " + shape_str(rows, cols));
  Matrix out(rows, cols);
  switch (kind) {
    case InitKind::zeros:
      out.setZero();
      break;
    case InitKind::xavier_uniform: {
      double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) out(r, c) = rng.uniform(-a, a);
      break;
    }
    case InitKind::orthogonal: {
      if (rows != cols)
        throw ContractError("init_matrix: orthogonal requires a square matrix, got " +
                            shape_str(rows, cols));
      Matrix gauss(rows, cols);
      for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) gauss(r, c) = rng.normal();
      Eigen::HouseholderQR<Matrix> qr(gauss);
      Matrix q = qr.householderQ();
      Matrix r_mat = qr.matrixQR().triangularView<Eigen::Upper>();
      for (Index c = 0; c < cols; ++c)
        if (r_mat(c, c) < 0) q.col(c) = -q.col(c);
      double defect = (q.transpose() * q - Matrix::Identity(rows, cols)).cwiseAbs().maxCoeff();
      if (defect > 1e-8)
        throw ContractError("init_matrix: orthogonalization failed, defect " +
                            std::to_string(defect));
      out = q;
      break;
    }
  }
  return Tensor::parameter(std::move(out), std::move(name));
}

Mlp Mlp::make(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng,
              const std::string& name, FeatureMap fm) {
  Mlp mlp;
  mlp.input_dim_ = input_dim;
  mlp.output_dim_ = output_dim;
  mlp.feature_map_ = fm;
  mlp.name_ = name;
  int fan_in = fm == FeatureMap::quadratic ? 2 * input_dim : input_dim;
  std::vector<int> dims{fan_in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    std::string base = name + ".l" + std::to_string(i);
    Layer layer;
    layer.W = init_matrix(InitKind::xavier_uniform, dims[i], dims[i + 1], rng, base + ".W");
    layer.b = Tensor::parameter(Matrix::Zero(1, dims[i + 1]), base + ".b");
    mlp.layers_.push_back(std::move(layer));
  }
  return mlp;
}

void Mlp::check_input(Index cols) const {
  if (cols != input_dim_)
    throw ShapeError("mlp '" + name_ + "': input width " + std::to_string(cols) +
                     " does not match layer 0 fan-in " + std::to_string(input_dim_));
}

Tensor Mlp::forward(const Tensor& x) const {
  check_input(x.cols());
  Tensor h = feature_map_ == FeatureMap::quadratic ? quad_augment(x) : x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (h.cols() != layers_[i].W.rows())
      throw ShapeError("mlp '" + name_ + "' layer " + std::to_string(i) + ": input width " +
                       std::to_string(h.cols()) + " vs fan-in " +
                       std::to_string(layers_[i].W.rows()));
    h = add_rowvec(matmul(h, layers_[i].W), layers_[i].b);
    if (i + 1 < layers_.size()) h = tanh_t(h);
  }
  return h;
}

Matrix Mlp::eval(const Matrix& x) const {
  check_input(x.cols());
  Matrix h;
  if (feature_map_ == FeatureMap::quadratic) {
    h.resize(x.rows(), 2 * x.cols());
    h.leftCols(x.cols()) = x;
    h.rightCols(x.cols()) = x.array().square();
  } else {
    h = x;
  }
  for (size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = h * layers_[i].W.value();
    z.rowwise() += layers_[i].b.value().row(0);
    h = i + 1 < layers_.size() ? Matrix(z.array().tanh()) : std::move(z);
  }
  return h;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.W);
    out.push_back(l.b);
  }
  return out;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  slots_.reserve(params_.size());
  for (const auto& p : params_) {
    Slot s;
    s.m = Matrix::Zero(p.rows(), p.cols());
    s.v = Matrix::Zero(p.rows(), p.cols());
    slots_.push_back(std::move(s));
  }
}

void Adam::step() {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad())
      throw ContractError("adam: missing gradient for parameter '" + p.name() + "'");
    const Matrix& g = p.grad();
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ContractError("adam: gradient shape mismatch for '" + p.name() + "'");
    Slot& s = slots_[i];
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v.array() + (1.0 - cfg_.beta2) * g.array().square();
    Matrix m_hat = s.m / bc1;
    Matrix v_hat = s.v / bc2;
    p.raw_value().array() -= cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_global_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.grad().squaredNorm();
  }
  double norm = std::sqrt(sq);
  double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (const auto& p : params) {
      if (p.has_grad()) {
        auto n = p.node();
        n->grad *= coef;
      }
    }
  }
  return norm;
}

}  // namespace kippo
