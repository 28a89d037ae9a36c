#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kippo/nn.hpp"
#include "kippo/rng.hpp"
#include "kippo/tensor.hpp"
#include "test_helpers.hpp"

using namespace kippo;

TEST_CASE("tensor shape and grad invariants") {
  Tensor t = Tensor::constant(Matrix::Zero(3, 2));
  CHECK(t.shape() == std::vector<Index>{3, 2});
  CHECK(t.size() == 6);
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2), "p");
  p.zero_grad();
  CHECK(p.grad().rows() == 2);
  CHECK(p.grad().cols() == 2);
}

TEST_CASE("backward of sum(W x) gives x per row") {
  Matrix w0(2, 3);
  w0 << 1, 2, 3, 4, 5, 6;
  Tensor W = Tensor::parameter(w0, "W");
  Matrix xv(3, 1);
  xv << 0.5, -1.5, 2.0;
  Tensor x = Tensor::constant(xv);
  Tensor loss = sum_all(matmul(W, x));
  W.zero_grad();
  loss.backward();
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(W.grad()(i, j) == xv(j, 0));
}

TEST_CASE("tanh(w)^2 has zero gradient at w = 0") {
  Tensor w = Tensor::parameter(Matrix::Zero(1, 1), "w");
  Tensor loss = sum_all(square(tanh_t(w)));
  w.zero_grad();
  loss.backward();
  CHECK(w.grad()(0, 0) == 0.0);
}

TEST_CASE("backward on non-scalar is a contract error") {
  Tensor W = Tensor::parameter(Matrix::Ones(2, 2), "W");
  Tensor y = matmul(W, Tensor::constant(Matrix::Ones(2, 2)));
  CHECK_THROWS_AS(y.backward(), ContractError);
}

TEST_CASE("repeated backward without reset is a contract error") {
  Tensor w = Tensor::parameter(Matrix::Ones(1, 1), "w");
  auto make_loss = [&] { return sum_all(square(w)); };
  w.zero_grad();
  make_loss().backward();
  CHECK_THROWS_AS(make_loss().backward(), ContractError);
  w.zero_grad();
  CHECK_NOTHROW(make_loss().backward());
}

TEST_CASE("non-finite values are detectable, not silent") {
  Matrix v(1, 2);
  v << 1.0, std::nan("");
  Tensor t = Tensor::constant(v);
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(check_finite(t, "probe"), NanAbort);
  Tensor ok = Tensor::constant(Matrix::Ones(1, 2));
  CHECK(ok.all_finite());
}

TEST_CASE("elementwise op gradients match finite differences") {
  Rng rng(7);
  Tensor a = Tensor::parameter(Matrix::NullaryExpr(3, 4, [&] { return rng.uniform(-1, 1); }), "a");
  Tensor b = Tensor::parameter(Matrix::NullaryExpr(3, 4, [&] { return rng.uniform(-1, 1); }), "b");
  auto builders = std::vector<std::function<Tensor()>>{
      [&] { return mean_all(mul(a, b)); },
      [&] { return mean_all(square(sub(a, b))); },
      [&] { return sum_all(min_t(a, b)); },
      [&] { return sum_all(max_t(a, b)); },
      [&] { return mean_all(exp_t(a)); },
      [&] { return mean_all(log_t(add_const(square(a), 1.0))); },
      [&] { return mean_all(clamp(a, -0.5, 0.5)); },
      [&] { return sum_all(row_mean(mul(a, b))); },
      [&] { return mean_all(quad_augment(a)); },
      [&] { return mean_all(slice_rows(concat_rows({a, b}), 1, 4)); },
      [&] { return mean_all(add_rowvec(b, Tensor::parameter(Matrix::Ones(1, 4), "r"))); },
  };
  for (auto& make : builders) {
    double err = testing::max_fd_rel_err({a, b}, make);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("mlp identity affine layer passes input through") {
  Rng rng(1);
  Mlp mlp = Mlp::make(2, {}, 2, rng, "net");
  mlp.layers()[0].W.raw_value() = Matrix::Identity(2, 2);
  mlp.layers()[0].b.raw_value().setZero();
  Matrix in(1, 2);
  in << 3.0, -1.0;
  Matrix out = mlp.eval(in);
  CHECK(out(0, 0) == 3.0);
  CHECK(out(0, 1) == -1.0);
  Tensor tape_out = mlp.forward(Tensor::constant(in));
  CHECK(tape_out.value()(0, 0) == 3.0);
  CHECK(tape_out.value()(0, 1) == -1.0);
}

TEST_CASE("mlp zero input is a fixed point of tanh stack with unit weights") {
  Rng rng(1);
  Mlp mlp = Mlp::make(1, {1}, 1, rng, "net");
  mlp.layers()[0].W.raw_value() = Matrix::Ones(1, 1);
  mlp.layers()[0].b.raw_value().setZero();
  mlp.layers()[1].W.raw_value() = Matrix::Ones(1, 1);
  mlp.layers()[1].b.raw_value().setZero();
  Matrix in = Matrix::Zero(1, 1);
  CHECK(mlp.eval(in)(0, 0) == 0.0);
}

TEST_CASE("mlp forward matches an independent straight-line evaluation") {
  Rng rng(42);
  Mlp mlp = Mlp::make(2, {8}, 2, rng, "net");
  Rng in_rng(43);
  Matrix in = Matrix::NullaryExpr(5, 2, [&] { return in_rng.uniform(-2, 2); });
  Matrix got = mlp.eval(in);
  Tensor tape = mlp.forward(Tensor::constant(in));

  // oracle: plain nested loops, no shared code with Mlp
  const Matrix& W1 = mlp.layers()[0].W.value();
  const Matrix& b1 = mlp.layers()[0].b.value();
  const Matrix& W2 = mlp.layers()[1].W.value();
  const Matrix& b2 = mlp.layers()[1].b.value();
  for (Index n = 0; n < in.rows(); ++n) {
    std::vector<double> h(8, 0.0);
    for (int j = 0; j < 8; ++j) {
      double z = b1(0, j);
      for (int i = 0; i < 2; ++i) z += in(n, i) * W1(i, j);
      h[static_cast<size_t>(j)] = std::tanh(z);
    }
    for (int k = 0; k < 2; ++k) {
      double z = b2(0, k);
      for (int j = 0; j < 8; ++j) z += h[static_cast<size_t>(j)] * W2(j, k);
      double rel = std::abs(got(n, k) - z) / std::max(1.0, std::abs(z));
      CHECK(rel < 1e-12);
      CHECK(tape.value()(n, k) == got(n, k));
    }
  }
}

TEST_CASE("mlp dimension mismatch names the layer") {
  Rng rng(1);
  Mlp mlp = Mlp::make(3, {4}, 2, rng, "enc");
  CHECK_THROWS_WITH_AS(mlp.forward(Tensor::constant(Matrix::Zero(1, 5))),
                       doctest::Contains("enc"), ShapeError);
}

TEST_CASE("random 3-layer net gradients match finite differences") {
  Rng rng(11);
  Mlp mlp = Mlp::make(3, {5, 4}, 2, rng, "net");
  Rng in_rng(12);
  Matrix in = Matrix::NullaryExpr(4, 3, [&] { return in_rng.uniform(-1, 1); });
  Matrix target = Matrix::NullaryExpr(4, 2, [&] { return in_rng.uniform(-1, 1); });
  auto loss = [&] {
    return mean_all(square(sub(mlp.forward(Tensor::constant(in)), Tensor::constant(target))));
  };
  double err = testing::max_fd_rel_err(mlp.parameters(), loss);
  CHECK(err < 1e-4);
}

TEST_CASE("init_matrix zeros") {
  Rng rng(1);
  Tensor z = init_matrix(InitKind::zeros, 3, 2, rng);
  CHECK(z.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("init_matrix orthogonal satisfies Q^T Q = I") {
  Rng rng(5);
  Tensor q = init_matrix(InitKind::orthogonal, 4, 4, rng);
  Matrix defect = q.value().transpose() * q.value() - Matrix::Identity(4, 4);
  CHECK(defect.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_THROWS_AS(init_matrix(InitKind::orthogonal, 4, 3, rng), ContractError);
}

TEST_CASE("init_matrix xavier_uniform stays in the Glorot bound") {
  Rng rng(9);
  Tensor w = init_matrix(InitKind::xavier_uniform, 64, 64, rng);
  double bound = std::sqrt(6.0 / 128.0);
  CHECK(w.value().cwiseAbs().maxCoeff() <= bound);
  CHECK(std::abs(w.value().mean()) < 0.01);  // ~5 sigma for 4096 uniform samples
}

TEST_CASE("identical seed gives bitwise-identical initialization") {
  Rng rng1(123), rng2(123);
  Tensor a = init_matrix(InitKind::xavier_uniform, 16, 8, rng1);
  Tensor b = init_matrix(InitKind::xavier_uniform, 16, 8, rng2);
  CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam leaves parameters unchanged under zero gradient on a fresh state") {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2), "p");
  Adam adam({p}, {});
  adam.zero_grad();
  adam.step();
  CHECK((p.value() - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam first step with unit gradient moves by -lr/(1+eps)") {
  Tensor p = Tensor::parameter(Matrix::Zero(1, 1), "p");
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam adam({p}, cfg);
  adam.zero_grad();
  Tensor loss = sum_all(p);  // gradient exactly 1
  loss.backward();
  adam.step();
  double expected = -0.1 / (1.0 + cfg.eps);
  CHECK(p.value()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam missing gradient is a contract error") {
  Tensor p = Tensor::parameter(Matrix::Ones(1, 1), "p");
  Adam adam({p}, {});
  CHECK_THROWS_AS(adam.step(), ContractError);
}

TEST_CASE("adam on w^2 matches a scalar reference run and descends") {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 1.0), "w");
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam adam({p}, cfg);

  // independent scalar Adam
  double w = 1.0, m = 0.0, v = 0.0;
  std::vector<double> loss_hist;
  for (int t = 1; t <= 100; ++t) {
    adam.zero_grad();
    Tensor loss = sum_all(square(p));
    loss.backward();
    adam.step();

    double g = 2.0 * w;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    double mh = m / (1 - std::pow(cfg.beta1, t));
    double vh = v / (1 - std::pow(cfg.beta2, t));
    w -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);

    CHECK(p.value()(0, 0) == doctest::Approx(w).epsilon(1e-12));
    loss_hist.push_back(w * w);
  }
  CHECK(std::abs(p.value()(0, 0)) < 1.0);
  // the reference run descends monotonically after warmup until it starts
  // oscillating around the optimum at step 25
  for (size_t i = 11; i < 24; ++i) CHECK(loss_hist[i] <= loss_hist[i - 1]);
  CHECK(loss_hist.back() < 1e-3 * loss_hist[9]);
}

TEST_CASE("global grad norm clip caps the joint norm") {
  Tensor a = Tensor::parameter(Matrix::Zero(2, 2), "a");
  Tensor b = Tensor::parameter(Matrix::Zero(1, 3), "b");
  a.zero_grad();
  b.zero_grad();
  Tensor loss = add(scale(sum_all(a), 3.0), scale(sum_all(b), 4.0));
  loss.backward();
  double before = clip_global_grad_norm({a, b}, 0.5);
  double after = std::sqrt(a.grad().squaredNorm() + b.grad().squaredNorm());
  CHECK(before > 0.5);
  CHECK(after == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("rng streams restore exactly and split independently") {
  Rng a(99);
  a.next_u64();
  a.next_u64();
  Rng b = Rng::restore(a.key(), a.counter());
  CHECK(a.next_u64() == b.next_u64());
  Rng s1 = Rng(5).split("env");
  Rng s2 = Rng(5).split("action");
  CHECK(s1.next_u64() != s2.next_u64());
  Rng u(3);
  for (int i = 0; i < 1000; ++i) CHECK(u.uniform_int(7) < 7);
  Rng n(4);
  double acc = 0;
  for (int i = 0; i < 5000; ++i) acc += n.normal();
  CHECK(std::abs(acc / 5000.0) < 0.05);
}

TEST_CASE("detach cuts the gradient path") {
  Tensor w = Tensor::parameter(Matrix::Ones(1, 1), "w");
  Tensor y = square(w).detach();
  CHECK_FALSE(y.requires_grad());
  Tensor z = Tensor::parameter(Matrix::Ones(1, 1), "z");
  Tensor loss = sum_all(mul(y, z));
  w.zero_grad();
  z.zero_grad();
  loss.backward();
  CHECK(w.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.grad()(0, 0) == 1.0);
}
