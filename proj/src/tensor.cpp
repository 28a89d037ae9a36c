#include "kippo/tensor.hpp"

#include <unordered_set>

namespace kippo {

Tensor Tensor::constant(Matrix v) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(v);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix v, std::string name) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

Tensor Tensor::zeros(Index rows, Index cols) { return constant(Matrix::Zero(rows, cols)); }

const Matrix& Tensor::value() const {
  if (!n_) throw ContractError("Tensor: use of undefined tensor");
  return n_->value;
}

Matrix& Tensor::raw_value() {
  if (!n_) throw ContractError("Tensor: use of undefined tensor");
  return n_->value;
}

double Tensor::item() const {
  if (value().size() != 1)
    throw ContractError("Tensor::item: tensor is not scalar, shape " + shape_str(value()));
  return value()(0, 0);
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

bool Tensor::has_grad() const { return n_ && n_->grad.size() != 0; }

const Matrix& Tensor::grad() const {
  if (!n_ || n_->grad.size() == 0)
    throw ContractError("Tensor::grad: no gradient present for '" + (n_ ? n_->name : "") + "'");
  return n_->grad;
}

void Tensor::zero_grad() {
  if (!n_) return;
  n_->grad = Matrix::Zero(n_->value.rows(), n_->value.cols());
  n_->grad_fresh = false;
}

Tensor Tensor::detach() const { return Tensor::constant(value()); }

bool Tensor::all_finite() const {
  if (!n_) return true;
  if (!n_->value.allFinite()) return false;
  if (n_->grad.size() != 0 && !n_->grad.allFinite()) return false;
  return true;
}

const std::string& Tensor::name() const {
  static const std::string empty;
  return n_ ? n_->name : empty;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NanAbort("non-finite value in " + what);
}

void Tensor::backward() const {
  if (!n_) throw ContractError("backward: undefined tensor");
  if (n_->value.size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(n_->value));
  if (!n_->requires_grad)
    throw ContractError("backward: loss does not depend on any trainable parameter");

  // Topological order over the grad-relevant subgraph.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack{{n_.get(), 0}};
  seen.insert(n_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Accumulation without reset is a contract error (leaves only).
  for (TensorNode* n : order) {
    if (n->is_leaf && n->requires_grad && n->grad_fresh)
      throw ContractError("backward: gradient of '" + n->name +
                          "' was not reset; call zero_grad before the next backward");
  }

  // order is post-order (parents before children), so iterate in reverse.
  n_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(n->grad);
  }
  for (TensorNode* n : order) {
    if (n->is_leaf && n->requires_grad) n->grad_fresh = true;
  }
}

// --- op helpers --------------------------------------------------------------

Tensor make_op(Matrix value, std::vector<Tensor> parents,
               std::function<void(const Matrix&)> fn) {
  auto n = std::make_shared<TensorNode>();
  n->value = std::move(value);
  n->is_leaf = false;
  bool rg = false;
  for (const auto& p : parents) {
    rg = rg || p.requires_grad();
    n->parents.push_back(p.node());
  }
  n->requires_grad = rg;
  if (rg) n->backward_fn = std::move(fn);
  return Tensor(std::move(n));
}

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
              shape_str(b.value()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ, " + shape_str(a.value()) +
                                    " * " + shape_str(b.value()));
  auto an = a.node(), bn = b.node();
  return make_op(a.value() * b.value(), {a, b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * g);
  });
}

Tensor matmul_transB(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_transB: inner dimensions differ, " +
                                    shape_str(a.value()) + " * " + shape_str(b.value()) + "^T");
  auto an = a.node(), bn = b.node();
  return make_op(a.value() * b.value().transpose(), {a, b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * bn->value);
    if (bn->requires_grad) bn->accumulate(g.transpose() * an->value);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "add");
  auto an = a.node(), bn = b.node();
  return make_op(a.value() + b.value(), {a, b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "sub");
  auto an = a.node(), bn = b.node();
  return make_op(a.value() - b.value(), {a, b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(-g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "mul");
  auto an = a.node(), bn = b.node();
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g.cwiseProduct(bn->value));
    if (bn->requires_grad) bn->accumulate(g.cwiseProduct(an->value));
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(),
          "add_rowvec: bias shape " + shape_str(row.value()) + " incompatible with " +
              shape_str(a.value()));
  auto an = a.node(), rn = row.node();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return make_op(std::move(v), {a, row}, [an, rn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (rn->requires_grad) rn->accumulate(g.colwise().sum());
  });
}

Tensor broadcast_rows(const Tensor& row, Index n) {
  require(row.rows() == 1, "broadcast_rows: expected a row vector, got " + shape_str(row.value()));
  auto rn = row.node();
  return make_op(row.value().replicate(n, 1), {row}, [rn](const Matrix& g) {
    if (rn->requires_grad) rn->accumulate(g.colwise().sum());
  });
}

Tensor scale(const Tensor& a, double c) {
  auto an = a.node();
  return make_op(a.value() * c, {a}, [an, c](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * c);
  });
}

Tensor add_const(const Tensor& a, double c) {
  auto an = a.node();
  return make_op((a.value().array() + c).matrix(), {a}, [an](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh_t(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(a.value().array().tanh().matrix(), {a}, nullptr);
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    out.node()->backward_fn = [an, self](const Matrix& g) {
      an->accumulate((g.array() * (1.0 - self->value.array().square())).matrix());
    };
  }
  return out;
}

Tensor exp_t(const Tensor& a) {
  auto an = a.node();
  auto out = make_op(a.value().array().exp().matrix(), {a}, nullptr);
  if (out.requires_grad()) {
    TensorNode* self = out.node().get();
    out.node()->backward_fn = [an, self](const Matrix& g) {
      an->accumulate(g.cwiseProduct(self->value));
    };
  }
  return out;
}

Tensor log_t(const Tensor& a) {
  auto an = a.node();
  return make_op(a.value().array().log().matrix(), {a}, [an](const Matrix& g) {
    an->accumulate(g.cwiseQuotient(an->value));
  });
}

Tensor square(const Tensor& a) {
  auto an = a.node();
  return make_op(a.value().array().square().matrix(), {a}, [an](const Matrix& g) {
    an->accumulate(2.0 * g.cwiseProduct(an->value));
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  auto an = a.node();
  return make_op(a.value().array().max(lo).min(hi).matrix(), {a}, [an, lo, hi](const Matrix& g) {
    // gradient passes inside [lo, hi] inclusive
    Matrix mask = ((an->value.array() >= lo) && (an->value.array() <= hi)).cast<double>().matrix();
    an->accumulate(g.cwiseProduct(mask));
  });
}

Tensor min_t(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "min");
  auto an = a.node(), bn = b.node();
  return make_op(a.value().cwiseMin(b.value()), {a, b}, [an, bn](const Matrix& g) {
    Matrix pick_a = (an->value.array() <= bn->value.array()).cast<double>().matrix();
    if (an->requires_grad) an->accumulate(g.cwiseProduct(pick_a));
    if (bn->requires_grad) bn->accumulate(g.cwiseProduct((1.0 - pick_a.array()).matrix().eval()));
  });
}

Tensor max_t(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "max");
  auto an = a.node(), bn = b.node();
  return make_op(a.value().cwiseMax(b.value()), {a, b}, [an, bn](const Matrix& g) {
    Matrix pick_a = (an->value.array() >= bn->value.array()).cast<double>().matrix();
    if (an->requires_grad) an->accumulate(g.cwiseProduct(pick_a));
    if (bn->requires_grad) bn->accumulate(g.cwiseProduct((1.0 - pick_a.array()).matrix().eval()));
  });
}

Tensor sum_all(const Tensor& a) {
  auto an = a.node();
  return make_op(Matrix::Constant(1, 1, a.value().sum()), {a}, [an](const Matrix& g) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
  });
}

Tensor mean_all(const Tensor& a) {
  auto an = a.node();
  double inv = 1.0 / static_cast<double>(a.size());
  return make_op(Matrix::Constant(1, 1, a.value().sum() * inv), {a}, [an, inv](const Matrix& g) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0) * inv));
  });
}

Tensor row_sum(const Tensor& a) {
  auto an = a.node();
  return make_op(a.value().rowwise().sum(), {a}, [an](const Matrix& g) {
    an->accumulate(g * Matrix::Ones(1, an->value.cols()));
  });
}

Tensor row_mean(const Tensor& a) {
  auto an = a.node();
  double inv = 1.0 / static_cast<double>(a.cols());
  return make_op(a.value().rowwise().mean(), {a}, [an, inv](const Matrix& g) {
    an->accumulate(g * Matrix::Constant(1, an->value.cols(), inv));
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index len) {
  require(start >= 0 && len >= 1 && start + len <= a.rows(),
          "slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of range for " + shape_str(a.value()));
  auto an = a.node();
  return make_op(a.value().middleRows(start, len), {a}, [an, start, len](const Matrix& g) {
    an->accumulate_rows(start, len, g);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: empty input");
  Index cols = parts[0].cols(), rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op(std::move(v), parts, [nodes](const Matrix& g) {
    Index r0 = 0;
    for (auto& n : nodes) {
      if (n->requires_grad) n->accumulate(g.middleRows(r0, n->value.rows()));
      r0 += n->value.rows();
    }
  });
}

Tensor quad_augment(const Tensor& a) {
  auto an = a.node();
  Index d = a.cols();
  Matrix v(a.rows(), 2 * d);
  v.leftCols(d) = a.value();
  v.rightCols(d) = a.value().array().square();
  return make_op(std::move(v), {a}, [an, d](const Matrix& g) {
    an->accumulate(g.leftCols(d) + 2.0 * g.rightCols(d).cwiseProduct(an->value));
  });
}

}  // namespace kippo
