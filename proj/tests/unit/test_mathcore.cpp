#include "gradcheck.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/network.hpp"
#include "rehabsnn/mathcore/ops.hpp"
#include "rehabsnn/mathcore/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace rehabsnn {
namespace {

using math::Matrix;
using math::Parameter;
using math::Tape;
using math::Var;

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

Matrix mat(int r, int c, std::initializer_list<double> v) {
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (double x : v) m.data()[i++] = x;
  return m;
}

Matrix linear_value(const Matrix& w, const Matrix& x, const Matrix& b) {
  Tape t(Tape::Mode::kNoGrad);
  return math::linear(t.constant(x), t.constant(w), t.constant(b)).value();
}

TEST(Linear, Identity) {
  EXPECT_EQ(linear_value(mat(2, 2, {1, 0, 0, 1}), row({3, 4}), row({0, 0})), row({3, 4}));
}

TEST(Linear, Scalar) { EXPECT_DOUBLE_EQ(linear_value(mat(1, 1, {2}), row({0.5}), row({0.1}))(0, 0), 1.1); }

TEST(Linear, Cancellation) { EXPECT_EQ(linear_value(mat(1, 2, {1, -1}), row({5, 5}), row({0}))(0, 0), 0.0); }

TEST(Linear, ShapeMismatchReportsShapes) {
  Tape t;
  try {
    math::linear(t.constant(row({1, 2, 3})), t.constant(mat(2, 2, {1, 0, 0, 1})), t.constant(row({0, 0})));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[1x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2x2]"), std::string::npos);
  }
}

TEST(SurrogateSpike, InclusiveThreshold) {
  Tape t;
  Var s = math::surrogate_spike(t.constant(row({2.0})), t.constant(row({2.0})), 10.0);
  EXPECT_EQ(s.value()(0, 0), 1.0);
}

TEST(SurrogateSpike, BelowThresholdAndAdjoint) {
  Tape t;
  Parameter h("h", row({1.9}));
  Parameter vth("vth", row({2.0}));
  Var s = math::surrogate_spike(t.param(h), t.param(vth), 10.0);
  EXPECT_EQ(s.value()(0, 0), 0.0);
  t.backward(math::sum(s));
  EXPECT_NEAR(h.grad(0, 0), 0.25, 1e-12);
  EXPECT_NEAR(vth.grad(0, 0), -0.25, 1e-12);
}

TEST(SurrogateSpike, AdjointAtThresholdIsOne) { EXPECT_DOUBLE_EQ(math::fast_sigmoid_grad(0.0, 10.0), 1.0); }

TEST(Backward, LinearProduct) {
  Tape t;
  Parameter w("w", row({0.7}));
  Var loss = math::mul(t.param(w), t.constant(row({3.0})));
  t.backward(loss);
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 3.0);
}

TEST(Backward, StationaryPoint) {
  Tape t;
  Parameter w("w", row({1.0}));
  t.backward(math::square(math::add_scalar(t.param(w), -1.0)));
  EXPECT_EQ(w.grad(0, 0), 0.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape t;
  Parameter w("w", row({1.0, 2.0}));
  EXPECT_THROW(t.backward(math::tanh(t.param(w))), ShapeError);
}

TEST(Backward, UnusedParameterGetsZero) {
  Tape t;
  Parameter used("used", row({0.3}));
  Parameter unused("unused", row({0.9}));
  t.param(unused);
  t.backward(math::square(t.param(used)));
  EXPECT_EQ(unused.grad(0, 0), 0.0);
  EXPECT_NE(used.grad(0, 0), 0.0);
}

// Two-layer tanh MLP; the loss is a fixed random projection of the outputs.
TEST(FiniteDifference, TanhMlpHundredSeeds) {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    math::Dense l1(4, 6, rng, "l1");
    math::Dense l2(6, 3, rng, "l2");
    const Matrix x = testing::random_matrix(5, 4, rng);
    const Matrix proj = testing::random_matrix(5, 3, rng);
    auto run = [&](Tape& t) {
      Var h = math::tanh(l1.apply(t, t.constant(x)));
      Var y = math::tanh(l2.apply(t, h));
      return math::sum(math::mul(y, t.constant(proj)));
    };
    std::vector<Parameter*> params{&l1.weight, &l1.bias, &l2.weight, &l2.bias};
    for (Parameter* p : params) p->zero_grad();
    {
      Tape t;
      t.backward(run(t));
    }
    auto loss = [&] {
      Tape t(Tape::Mode::kNoGrad);
      return run(t).scalar();
    };
    const auto r = testing::check_gradients(params, loss);
    ASSERT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
  }
}

// ReLU critic-shaped net: Q(s, a) from concatenated inputs.
TEST(FiniteDifference, ReluCriticHundredSeeds) {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    math::MlpNetwork net(5, {8, 6}, {1}, rng);
    const Matrix s = testing::random_matrix(4, 4, rng);
    const Matrix a = testing::random_matrix(4, 1, rng);
    const Matrix target = testing::random_matrix(4, 1, rng);
    auto run = [&](Tape& t) {
      Var q = net.forward(t, math::concat_cols(t.constant(s), t.constant(a)))[0];
      return math::mean(math::square(math::sub(q, t.constant(target))));
    };
    for (Parameter* p : net.parameters()) p->zero_grad();
    {
      Tape t;
      t.backward(run(t));
    }
    auto loss = [&] {
      Tape t(Tape::Mode::kNoGrad);
      return run(t).scalar();
    };
    const auto r = testing::check_gradients(net.parameters(), loss);
    ASSERT_LT(r.max_rel_error, 1e-4) << "seed " << seed << ": " << r.worst;
  }
}

TEST(FiniteDifference, ElementwiseOps) {
  std::mt19937_64 rng(7);
  Parameter a("a", testing::random_matrix(3, 4, rng, 0.5, 1.5));
  Parameter b("b", testing::random_matrix(1, 4, rng, -1.0, 1.0));
  Parameter c("c", testing::random_matrix(3, 4, rng, -1.0, 1.0));
  auto run = [&](Tape& t) {
    Var x = math::add(math::log(t.param(a)), t.param(b));
    Var y = math::minimum(math::exp(x), math::scale(t.param(c), 3.0));
    Var z = math::concat_cols(math::slice_cols(y, 1, 2), math::sum_cols(math::neg(y)));
    return math::mean(math::square(math::slice_rows(z, 1, 2)));
  };
  std::vector<Parameter*> params{&a, &b, &c};
  {
    Tape t;
    t.backward(run(t));
  }
  auto loss = [&] {
    Tape t(Tape::Mode::kNoGrad);
    return run(t).scalar();
  };
  EXPECT_LT(testing::check_gradients(params, loss).max_rel_error, 1e-4);
}

TEST(Determinism, SameSeedBitIdentical) {
  auto once = [](std::vector<Matrix>& grads) {
    std::mt19937_64 rng(42);
    math::MlpNetwork net(3, {16, 16}, {2}, rng);
    const Matrix x = testing::random_matrix(8, 3, rng);
    Tape t;
    Var y = net.forward(t, t.constant(x))[0];
    t.backward(math::sum(math::square(y)));
    for (Parameter* p : net.parameters()) grads.push_back(p->grad);
    return y.value();
  };
  std::vector<Matrix> g1, g2;
  const Matrix y1 = once(g1);
  const Matrix y2 = once(g2);
  EXPECT_EQ(y1, y2);
  ASSERT_EQ(g1.size(), g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

TEST(Adam, ZeroGradientLeavesParams) {
  Parameter p("p", row({1.0, -2.0}));
  math::Adam opt({&p}, {});
  p.zero_grad();
  opt.step();
  EXPECT_EQ(p.value, row({1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", row({0.5}));
  math::Adam opt({&p}, {.lr = 1e-3});
  p.grad = row({1.0});
  opt.step();
  // m_hat = 1, v_hat = 1 -> delta = -lr / (1 + eps)
  EXPECT_NEAR(p.value(0, 0) - 0.5, -1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, SymmetricParametersStayEqual) {
  Parameter a("a", row({0.3}));
  Parameter b("b", row({0.3}));
  math::Adam opt({&a, &b}, {});
  for (int i = 0; i < 10; ++i) {
    a.grad = row({0.1 * i - 0.4});
    b.grad = a.grad;
    opt.step();
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(Adam, RejectsNanGradient) {
  Parameter p("p", row({1.0}));
  math::Adam opt({&p}, {});
  p.grad = row({std::nan("")});
  EXPECT_THROW(opt.step(), NumericalError);
  EXPECT_EQ(p.value(0, 0), 1.0);
}

TEST(Polyak, SoftUpdate) {
  Parameter target("t", row({0.0}));
  Parameter online("o", row({1.0}));
  math::polyak_average({&target}, {&online}, 0.005);
  EXPECT_DOUBLE_EQ(target.value(0, 0), 0.005);
}

TEST(Polyak, FullCopy) {
  Parameter target("t", row({3.0, 4.0}));
  Parameter online("o", row({-1.0, 2.0}));
  math::polyak_average({&target}, {&online}, 1.0);
  EXPECT_EQ(target.value, online.value);
}

TEST(Polyak, FixedPoint) {
  Parameter target("t", row({0.25, 0.5}));
  Parameter online("o", row({0.25, 0.5}));
  math::polyak_average({&target}, {&online}, 0.3);
  EXPECT_EQ(target.value, online.value);
}

TEST(Polyak, RejectsBadTauAndShapes) {
  Parameter target("t", row({0.0}));
  Parameter online("o", row({1.0, 2.0}));
  EXPECT_THROW(math::polyak_average({&target}, {&target}, 0.0), ShapeError);
  EXPECT_THROW(math::polyak_average({&target}, {&online}, 0.5), ShapeError);
}

TEST(Polyak, GapDecaysGeometrically) {
  Parameter target("t", row({0.0}));
  Parameter online("o", row({1.0}));
  const double tau = 0.005;
  for (int n = 1; n <= 200; ++n) {
    math::polyak_average({&target}, {&online}, tau);
    EXPECT_NEAR(1.0 - target.value(0, 0), std::pow(1.0 - tau, n), 1e-12);
  }
}

}  // namespace
}  // namespace rehabsnn
