#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kippo/common.hpp"

namespace kippo {

// Node of the reverse-mode tape. Values are dense 64-bit matrices; scalars are
// 1x1, vectors are 1xN or Nx1. A node requires grad when it is a trainable
// leaf or has one upstream. Gradients of leaves persist across graphs and are
// reset explicitly with zero_grad(); running backward twice into a leaf whose
// gradient was not reset is a contract error.
struct TensorNode {
  Matrix value;
  Matrix grad;                 // empty until first accumulation / zero_grad
  bool requires_grad = false;
  bool is_leaf = true;
  bool grad_fresh = false;     // leaf holds an unconsumed backward result
  std::string name;            // parameters only, for diagnostics
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const Matrix&)> backward_fn;

  template <class E>
  void accumulate(const Eigen::MatrixBase<E>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  template <class E>
  void accumulate_rows(Index r0, Index n, const Eigen::MatrixBase<E>& g) {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    grad.middleRows(r0, n) += g;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix v);
  static Tensor parameter(Matrix v, std::string name = "");
  static Tensor scalar(double v);
  static Tensor zeros(Index rows, Index cols);

  bool defined() const { return n_ != nullptr; }
  const Matrix& value() const;
  Matrix& raw_value();  // in-place mutation (optimizer updates)
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  Index size() const { return value().size(); }
  double item() const;  // scalar extraction; contract-checks 1x1

  bool requires_grad() const;
  bool has_grad() const;
  const Matrix& grad() const;  // contract-checks presence
  void zero_grad();
  Tensor detach() const;       // value copy with no history

  // True iff every entry of value (and grad, when present) is finite.
  bool all_finite() const;

  // Reverse-mode sweep from a scalar. Fills grad slots of every reachable
  // trainable leaf.
  void backward() const;

  const std::string& name() const;
  std::shared_ptr<TensorNode> node() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}
  std::shared_ptr<TensorNode> n_;
  friend Tensor make_op(Matrix value, std::vector<Tensor> parents,
                        std::function<void(const Matrix&)> fn);
};

// Throws NanAbort naming `what` if t contains NaN/Inf.
void check_finite(const Tensor& t, const std::string& what);

// --- tape operations -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T; the natural form for row-batched vectors against a matrix that
// acts on column vectors.
Tensor matmul_transB(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);     // elementwise
Tensor add_rowvec(const Tensor& a, const Tensor& row);
Tensor broadcast_rows(const Tensor& row, Index n);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor min_t(const Tensor& a, const Tensor& b);   // ties pass gradient to a
Tensor max_t(const Tensor& a, const Tensor& b);   // ties pass gradient to a

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor row_sum(const Tensor& a);   // BxD -> Bx1
Tensor row_mean(const Tensor& a);  // BxD -> Bx1

Tensor slice_rows(const Tensor& a, Index start, Index len);
Tensor concat_rows(const std::vector<Tensor>& parts);
// [x, x*x] column-wise; exact lifting hook used by test fixtures.
Tensor quad_augment(const Tensor& a);

}  // namespace kippo
