#include "gradcheck.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/ops.hpp"
#include "rehabsnn/snn/coding.hpp"
#include "rehabsnn/snn/layer.hpp"
#include "rehabsnn/snn/network.hpp"

#include <gtest/gtest.h>

namespace rehabsnn {
namespace {

using math::Matrix;
using math::Parameter;
using math::Tape;
using math::Var;
using snn::SpikingLayer;
using snn::SpikingNetwork;

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

SpikingLayer unit_layer(snn::ResetMode reset) {
  std::mt19937_64 rng(0);
  snn::SpikingOptions o;
  o.reset = reset;
  SpikingLayer l(1, 1, o, rng, "l");
  l.weight.value = row({1.0});
  l.bias.value = row({0.0});
  return l;
}

TEST(LifStep, IntegratesAndFires) {
  SpikingLayer l = unit_layer(snn::ResetMode::kZero);
  l.membrane = row({1.5});
  l.prev_spikes = row({0.0});
  const Matrix s = snn::lif_step(l, row({1.0}));
  EXPECT_DOUBLE_EQ(l.membrane(0, 0), 2.5);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(LifStep, ZeroResetAnnihilates) {
  SpikingLayer l = unit_layer(snn::ResetMode::kZero);
  l.membrane = row({2.5});
  l.prev_spikes = row({1.0});
  const Matrix s = snn::lif_step(l, row({0.7}));
  EXPECT_EQ(l.membrane(0, 0), 0.0);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(LifStep, SubtractReset) {
  SpikingLayer l = unit_layer(snn::ResetMode::kSubtract);
  l.membrane = row({2.5});
  l.prev_spikes = row({1.0});
  const Matrix s = snn::lif_step(l, row({0.7}));
  EXPECT_NEAR(l.membrane(0, 0), 1.2, 1e-12);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(LifStep, RejectsWrongWidth) {
  SpikingLayer l = unit_layer(snn::ResetMode::kZero);
  EXPECT_THROW(snn::lif_step(l, row({1.0, 2.0})), ShapeError);
}

TEST(LifStep, ZeroResetErasesHistory) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    SpikingLayer a(4, 6, {}, rng, "a");
    SpikingLayer b = a;
    const Matrix x = testing::random_matrix(1, 4, rng);
    a.prev_spikes = Matrix::Ones(1, 6);
    b.prev_spikes = Matrix::Ones(1, 6);
    a.membrane = testing::random_matrix(1, 6, rng, -3, 3);
    b.membrane = testing::random_matrix(1, 6, rng, -3, 3);
    snn::lif_step(a, x);
    snn::lif_step(b, x);
    EXPECT_EQ(a.membrane, b.membrane);
  }
}

TEST(SLeaky, ContinueClampsNegative) {
  SpikingLayer l = unit_layer(snn::ResetMode::kZero);
  l.kind = snn::NeuronKind::kSLeaky;
  l.membrane = row({-0.3, 0.5});
  snn::sleaky_continue(l);
  EXPECT_EQ(l.membrane, row({0.0, 0.5}));
  l.membrane = row({0.0, 0.0});
  snn::sleaky_continue(l);
  EXPECT_EQ(l.membrane, row({0.0, 0.0}));
}

TEST(SLeaky, ContinueRejectsLeaky) {
  SpikingLayer l = unit_layer(snn::ResetMode::kZero);
  EXPECT_THROW(snn::sleaky_continue(l), ShapeError);
}

TEST(SLeaky, ContinueDetachesHistory) {
  std::mt19937_64 rng(11);
  snn::SpikingOptions o;
  o.neuron = snn::NeuronKind::kSLeaky;
  SpikingNetwork net(3, {5}, {1}, 4, o, rng);
  Parameter first_input("x0", testing::random_matrix(1, 3, rng, 1.0, 3.0));
  Tape t;
  snn::RunResult r1 = net.run(t, t.param(first_input), 4, false, false);
  net.layers()[0].membrane = r1.final_membrane[0];
  net.layers()[0].prev_spikes = r1.final_spikes[0];
  snn::continue_membranes(net);
  snn::RunResult r2 = net.run(t, t.constant(testing::random_matrix(1, 3, rng)), 4, true, false,
                              snn::SpikeFunction::kFastSigmoidProxy);
  t.backward(math::sum(r2.heads[0]));
  EXPECT_TRUE(first_input.grad.isZero(0.0));
}

TEST(ResetMembranes, ZeroesAndIsIdempotent) {
  std::mt19937_64 rng(5);
  SpikingNetwork net(2, {4, 3}, {1}, 16, {}, rng);
  snn::spiking_forward(net, row({3.0, -2.0}), 16, false);
  snn::reset_membranes(net);
  for (const auto& l : net.layers()) EXPECT_EQ(l.membrane.size(), 0);
  snn::reset_membranes(net);
  const auto a = snn::spiking_forward(net, row({0.5, 0.5}), 16, false);
  snn::reset_membranes(net);
  const auto b = snn::spiking_forward(net, row({0.5, 0.5}), 16, false);
  EXPECT_EQ(a.heads[0], b.heads[0]);
}

TEST(DirectEncode, RepeatsInput) {
  const Matrix e = snn::direct_encode(row({1, 2}), 3);
  ASSERT_EQ(e.rows(), 3);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(Matrix(e.row(t)), row({1, 2}));
  EXPECT_EQ(snn::direct_encode(row({4, 5}), 1), row({4, 5}));
  EXPECT_EQ(Matrix(e.colwise().sum()), row({3, 6}));
  EXPECT_THROW(snn::direct_encode(row({1}), 0), ShapeError);
}

TEST(RateCoding, SaturatedAndSilent) {
  std::mt19937_64 rng(1);
  const Matrix ones = snn::rate_encode(row({1.0}), 50, rng);
  EXPECT_TRUE((ones.array() == 1.0).all());
  EXPECT_EQ(snn::rate_decode(ones), row({1.0}));
  const Matrix zeros = snn::rate_encode(row({0.0}), 50, rng);
  EXPECT_TRUE((zeros.array() == 0.0).all());
  EXPECT_EQ(snn::rate_decode(zeros), row({0.0}));
}

TEST(RateCoding, LawOfLargeNumbers) {
  std::mt19937_64 rng(2024);
  const Matrix x = row({0.1, 0.35, 0.5, 0.9});
  const Matrix d = snn::rate_decode(snn::rate_encode(x, 10000, rng));
  for (Eigen::Index i = 0; i < x.cols(); ++i) EXPECT_NEAR(d(0, i), x(0, i), 0.02);
}

TEST(RateCoding, RejectsOutOfRange) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(snn::rate_encode(row({1.2}), 4, rng), ShapeError);
  EXPECT_THROW(snn::rate_encode(row({-0.1}), 4, rng), ShapeError);
}

TEST(OwsDecode, Substitution) {
  snn::OwsDecoder d;
  d.weight = Parameter("w", row({0.5, -0.2, 0.1}));
  d.bias = Parameter("b", row({0.05}));
  EXPECT_NEAR(snn::ows_decode(d, row({1, 0, 1})), 0.65, 1e-12);
  EXPECT_EQ(snn::ows_decode(d, row({0, 0, 0})), 0.05);
  EXPECT_THROW(snn::ows_decode(d, row({1, 0})), ShapeError);
}

TEST(OwsDecode, MatchesBruteForceDotProduct) {
  std::mt19937_64 rng(9);
  snn::OwsDecoder d(12, 1, rng, "d");
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 1000; ++i) {
    Matrix s(1, 12);
    for (Eigen::Index j = 0; j < 12; ++j) s(0, j) = coin(rng) ? 1.0 : 0.0;
    double expect = d.bias.value(0, 0);
    for (Eigen::Index j = 0; j < 12; ++j) {
      if (s(0, j) == 1.0) expect += d.weight.value(0, j);
    }
    const double got = snn::ows_decode(d, s);
    EXPECT_NEAR(got, expect, 1e-12);
    Tape t(Tape::Mode::kNoGrad);
    EXPECT_NEAR(snn::ows_decode(t, d, t.constant(s)).scalar(), expect, 1e-12);
  }
}

TEST(SpikingForward, MatchesTrainingPass) {
  std::mt19937_64 rng(21);
  SpikingNetwork net(5, {16, 12}, {2, 2}, 16, {}, rng);
  const Matrix x = testing::random_matrix(1, 5, rng, -4, 4);
  Tape t;
  std::vector<Var> train = net.forward(t, t.constant(x));
  snn::reset_membranes(net);
  const auto inf = snn::spiking_forward(net, x, 16, true);
  EXPECT_EQ(train[0].value(), inf.heads[0]);
  EXPECT_EQ(train[1].value(), inf.heads[1]);
}

TEST(SpikingForward, DeadNetwork) {
  std::mt19937_64 rng(4);
  SpikingNetwork net(3, {4}, {1}, 16, {}, rng);
  net.layers()[0].weight.value.setZero();
  net.layers()[0].bias.value.setZero();
  net.decoders()[0].bias.value = row({0.3});
  for (int i = 0; i < 5; ++i) {
    snn::reset_membranes(net);
    const auto out = snn::spiking_forward(net, testing::random_matrix(1, 3, rng, -5, 5), 16, false);
    EXPECT_DOUBLE_EQ(out.heads[0](0, 0), 0.3);
    EXPECT_EQ(out.trace.total_spikes(), 0.0);
  }
}

TEST(SpikingForward, TraceAccounting) {
  std::mt19937_64 rng(8);
  SpikingNetwork net(3, {10, 8}, {1}, 16, {}, rng);
  const auto out = snn::spiking_forward(net, row({4.0, -3.0, 5.0}), 16, true);
  ASSERT_EQ(out.trace.steps(), 16);
  double total = 0.0;
  for (int t = 0; t < 16; ++t) {
    double tick = 0.0;
    for (const Matrix& s : out.trace.layer_spikes[t]) {
      EXPECT_TRUE(((s.array() == 0.0) || (s.array() == 1.0)).all());
      tick += s.sum();
    }
    EXPECT_EQ(tick, out.trace.step_spike_counts[t]);
    total += tick;
  }
  EXPECT_EQ(total, out.trace.total_spikes());
  EXPECT_GT(total, 0.0);
  EXPECT_EQ(out.trace.decoded.back()[0], out.heads[0]);
}

TEST(SpikingForward, StatefulnessContract) {
  std::mt19937_64 rng(13);
  SpikingNetwork net(3, {10, 8}, {1}, 16, {}, rng);
  const Matrix x = row({3.0, -2.0, 4.0});
  const auto first = snn::spiking_forward(net, x, 5, false);
  const auto carried = snn::spiking_forward(net, x, 5, false);
  snn::reset_membranes(net);
  const auto fresh1 = snn::spiking_forward(net, x, 5, false);
  snn::reset_membranes(net);
  const auto fresh2 = snn::spiking_forward(net, x, 5, false);
  EXPECT_EQ(fresh1.heads[0], fresh2.heads[0]);
  EXPECT_EQ(first.heads[0], fresh1.heads[0]);
  EXPECT_NE(carried.trace.step_spike_counts, fresh1.trace.step_spike_counts);
}

TEST(SpikingForward, BetaClampedByProjection) {
  std::mt19937_64 rng(2);
  SpikingNetwork net(2, {3}, {1}, 4, {}, rng);
  net.layers()[0].beta.value = row({1.4, -0.2, 0.5});
  net.project_parameters();
  EXPECT_EQ(net.layers()[0].beta.value, row({1.0, 0.0, 0.5}));
}

void proxy_gradcheck(snn::ResetMode reset, int seeds) {
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(500 + seed);
    snn::SpikingOptions o;
    o.reset = reset;
    SpikingNetwork net(3, {5, 4}, {2}, 5, o, rng);
    for (auto& l : net.layers()) {
      l.beta.value = testing::random_matrix(1, l.out_dim(), rng, 0.5, 0.95);
      l.threshold.value = testing::random_matrix(1, l.out_dim(), rng, 0.2, 1.0);
    }
    const Matrix x = testing::random_matrix(3, 3, rng, -2, 2);
    const Matrix proj = testing::random_matrix(3, 2, rng);
    auto run = [&](Tape& t) {
      snn::RunResult r = net.run(t, t.constant(x), 5, false, false, snn::SpikeFunction::kFastSigmoidProxy);
      return math::sum(math::mul(r.heads[0], t.constant(proj)));
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

TEST(FiniteDifference, ProxySpikingZeroReset) { proxy_gradcheck(snn::ResetMode::kZero, 100); }
TEST(FiniteDifference, ProxySpikingSubtractReset) { proxy_gradcheck(snn::ResetMode::kSubtract, 100); }

TEST(Trainability, OneStepReducesOwsLoss) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    SpikingNetwork net(3, {8}, {1}, 8, {}, rng);
    const Matrix x = testing::random_matrix(4, 3, rng, 0, 4);
    const Matrix target = testing::random_matrix(4, 1, rng);
    auto loss_of = [&](Tape& t) {
      return math::mean(math::square(math::sub(net.forward(t, t.constant(x))[0], t.constant(target))));
    };
    for (Parameter* p : net.parameters()) p->zero_grad();
    double before;
    {
      Tape t;
      Var l = loss_of(t);
      before = l.scalar();
      t.backward(l);
    }
    for (Parameter* p : net.parameters()) p->value -= 1e-3 * p->grad;
    net.project_parameters();
    Tape t(Tape::Mode::kNoGrad);
    EXPECT_LT(loss_of(t).scalar(), before) << "seed " << seed;
  }
}

}  // namespace
}  // namespace rehabsnn

namespace rehabsnn {
namespace {

TEST(SpikeLinear, MatchesDenseLinearValuesAndGradients) {
  std::mt19937_64 rng(31);
  std::bernoulli_distribution coin(0.2);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix s(40, 12);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = coin(rng) ? 1.0 : 0.0;
    Parameter w1("w", testing::random_matrix(7, 12, rng)), b1("b", testing::random_matrix(1, 7, rng));
    Parameter x1("x", s);
    Parameter w2 = w1, b2 = b1, x2 = x1;
    const Matrix proj = testing::random_matrix(40, 7, rng);
    Tape t1, t2;
    Var y1 = math::linear(t1.param(x1), t1.param(w1), t1.param(b1));
    Var y2 = snn::spike_linear(t2.param(x2), t2.param(w2), t2.param(b2));
    ASSERT_TRUE(y1.value().isApprox(y2.value(), 1e-12));
    t1.backward(math::sum(math::mul(y1, t1.constant(proj))));
    t2.backward(math::sum(math::mul(y2, t2.constant(proj))));
    EXPECT_TRUE(w1.grad.isApprox(w2.grad, 1e-12));
    EXPECT_TRUE(b1.grad.isApprox(b2.grad, 1e-12));
    EXPECT_TRUE(x1.grad.isApprox(x2.grad, 1e-12));
  }
}

}  // namespace
}  // namespace rehabsnn
