#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "diprl/nn/adam.hpp"
#include "diprl/nn/checkpoint.hpp"
#include "diprl/nn/finite_diff.hpp"
#include "support.hpp"

using namespace diprl;
using namespace diprl::nn;
using diprl::test::random_matrix;
using diprl::test::relu_margin;
using diprl::test::single_layer;

namespace {

MlpParams hand_relu_net() {
  MlpParams p;
  Matrix w1(2, 2);
  w1 << 1.0, -1.0, 2.0, 0.5;
  Vector b1(2);
  b1 << 0.5, -1.0;
  Matrix w2(1, 2);
  w2 << 3.0, -1.0;
  Vector b2(1);
  b2 << 0.25;
  p.layers = {{w1, b1}, {w2, b2}};
  p.activations = {Activation::relu};
  return p;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// 0.5 * ||f(x) - t||^2 summed over columns, with its analytic gradient.
struct SquaredLoss {
  Matrix x, t;
  double operator()(const MlpParams& p) const { return 0.5 * (mlp_apply_batch(p, x) - t).squaredNorm(); }
  GradBuffer gradient(const MlpParams& p) const {
    const auto trace = mlp_forward_batch(p, x);
    auto g = GradBuffer::zeros_like(p);
    accumulate_backward(p, trace, trace.result() - t, g);
    return g;
  }
};

}  // namespace

TEST(MlpForward, SingleAffineLayer) {
  const auto p = single_layer(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(mlp_forward(p, vec({3.0}))(0), 7.0);
}

TEST(MlpForward, ZeroDepthIsIdentity) {
  const MlpParams empty;
  const Vector x = vec({1.5, -2.0, 0.0});
  EXPECT_EQ(mlp_forward(empty, x), x);
}

TEST(MlpForward, TwoLayerReluMatchesHandComputation) {
  // hidden pre-activations: [1 - 2 + 0.5, 2 + 1 - 1] = [-0.5, 2] -> relu [0, 2]
  // output: 3*0 - 1*2 + 0.25 = -1.75
  EXPECT_DOUBLE_EQ(mlp_forward(hand_relu_net(), vec({1.0, 2.0}))(0), -1.75);
}

TEST(MlpForward, TanhHiddenLayer) {
  auto p = hand_relu_net();
  p.activations = {Activation::tanh};
  const double expected = 3.0 * std::tanh(-0.5) - std::tanh(2.0) + 0.25;
  EXPECT_NEAR(mlp_forward(p, vec({1.0, 2.0}))(0), expected, 1e-15);
}

TEST(MlpForward, DimensionMismatchThrows) {
  EXPECT_THROW(mlp_forward(hand_relu_net(), vec({1.0, 2.0, 3.0})), ShapeError);
}

TEST(MlpForward, RepeatedCallsAreBitIdentical) {
  std::mt19937_64 rng(3);
  const auto p = make_mlp({7, 16, 16, 3}, Activation::relu, rng);
  const Matrix x = random_matrix(7, 11, rng);
  const Matrix a = mlp_apply_batch(p, x);
  const Matrix b = mlp_apply_batch(p, x);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())), 0);
}

TEST(MlpForward, BatchColumnsMatchSingleForward) {
  std::mt19937_64 rng(4);
  const auto p = make_mlp({5, 8, 2}, Activation::tanh, rng);
  const Matrix x = random_matrix(5, 4, rng);
  const Matrix y = mlp_apply_batch(p, x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) EXPECT_TRUE(y.col(j).isApprox(mlp_forward(p, x.col(j)), 1e-14));
}

TEST(MakeMlp, InitializationWithinFanInBound) {
  std::mt19937_64 rng(5);
  const auto p = make_mlp({40, 16, 3}, Activation::relu, rng);
  ASSERT_EQ(p.depth(), 2u);
  for (const auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim()));
    EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), bound);
    EXPECT_LE(l.bias.cwiseAbs().maxCoeff(), bound);
  }
  EXPECT_EQ(p.parameter_count(), 40u * 16 + 16 + 16 * 3 + 3);
}

TEST(MlpBackward, OneLayerSquaredErrorByHand) {
  // L = 0.5 (y - t)^2, y = 1 * 2 + 0, t = 3: dL/dW = (2 - 3) * 2, dL/db = 2 - 3
  const auto p = single_layer(Matrix::Constant(1, 1, 1.0), Vector::Zero(1));
  const Vector x = vec({2.0});
  const double y = mlp_forward(p, x)(0);
  const auto g = mlp_backward(p, x, vec({y - 3.0}));
  EXPECT_DOUBLE_EQ(g.layers[0].weight(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(g.layers[0].bias(0), -1.0);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradient) {
  std::mt19937_64 rng(6);
  const auto p = make_mlp({4, 6, 2}, Activation::relu, rng);
  const auto g = mlp_backward(p, random_matrix(4, 1, rng).col(0), Vector::Zero(2));
  for (const auto& l : g.layers) {
    EXPECT_EQ(l.weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MlpBackward, HandReluNetGradient) {
  // upstream 1 through the hand net at x = [1, 2]: hidden h = [0, 2], unit 0 inactive.
  const auto g = mlp_backward(hand_relu_net(), vec({1.0, 2.0}), vec({1.0}));
  EXPECT_DOUBLE_EQ(g.layers[1].weight(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.layers[1].weight(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(g.layers[1].bias(0), 1.0);
  EXPECT_DOUBLE_EQ(g.layers[0].weight(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.layers[0].weight(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(g.layers[0].weight(1, 1), -2.0);
  EXPECT_DOUBLE_EQ(g.layers[0].bias(1), -1.0);
}

TEST(MlpBackward, UpstreamShapeMismatchThrows) {
  EXPECT_THROW(mlp_backward(hand_relu_net(), vec({1.0, 2.0}), vec({1.0, 1.0})), ShapeError);
}

TEST(MlpBackward, InputGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(7);
  const auto p = make_mlp({3, 5, 2}, Activation::tanh, rng);
  const Matrix x = random_matrix(3, 1, rng);
  const Matrix up = random_matrix(2, 1, rng);
  auto g = GradBuffer::zeros_like(p);
  Matrix dx;
  accumulate_backward(p, mlp_forward_batch(p, x), up, g, &dx);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 3; ++i) {
    Matrix xp = x, xm = x;
    xp(i, 0) += h;
    xm(i, 0) -= h;
    const double numeric = (up.col(0).dot(mlp_apply_batch(p, xp).col(0)) - up.col(0).dot(mlp_apply_batch(p, xm).col(0))) / (2 * h);
    EXPECT_NEAR(dx(i, 0), numeric, 1e-8);
  }
}

TEST(FiniteDiff, QuadraticLossOnLinearNet) {
  std::mt19937_64 rng(8);
  const auto p = make_mlp({4, 3}, Activation::identity, rng);
  const SquaredLoss loss{random_matrix(4, 6, rng), random_matrix(3, 6, rng)};
  EXPECT_LE(finite_diff_check(p, loss, loss.gradient(p), 1e-5), 1e-6);
}

TEST(FiniteDiff, ConstantLossHasZeroDiscrepancy) {
  std::mt19937_64 rng(9);
  const auto p = make_mlp({3, 4, 2}, Activation::relu, rng);
  EXPECT_EQ(finite_diff_check(p, [](const MlpParams&) { return 4.0; }, GradBuffer::zeros_like(p), 1e-5), 0.0);
}

TEST(FiniteDiff, WrongGradientIsDetected) {
  std::mt19937_64 rng(10);
  const auto p = make_mlp({4, 3}, Activation::identity, rng);
  const SquaredLoss loss{random_matrix(4, 6, rng), random_matrix(3, 6, rng)};
  auto g = loss.gradient(p);
  g.layers[0].weight(1, 2) += 0.5;
  EXPECT_GT(finite_diff_check(p, loss, g, 1e-5), 1e-2);
}

TEST(FiniteDiff, ShapeMismatchReportsInfinity) {
  std::mt19937_64 rng(11);
  const auto p = make_mlp({4, 3}, Activation::identity, rng);
  const auto q = make_mlp({4, 2}, Activation::identity, rng);
  EXPECT_TRUE(std::isinf(finite_diff_check(p, [](const MlpParams&) { return 0.0; }, GradBuffer::zeros_like(q), 1e-5)));
}

// Property: randomized relu and tanh networks, inputs kept at least 10 epsilon
// away from any relu kink.
TEST(FiniteDiff, RandomNetworksAgreeWithBackward) {
  std::mt19937_64 rng(12);
  const double eps = 1e-6;
  int checked = 0;
  for (int trial = 0; checked < 25 && trial < 500; ++trial) {
    const auto act = trial % 2 ? Activation::relu : Activation::tanh;
    std::uniform_int_distribution<std::size_t> width(1, 9);
    const auto p = make_mlp({width(rng), width(rng), width(rng), width(rng)}, act, rng);
    const SquaredLoss loss{random_matrix(static_cast<Eigen::Index>(p.in_dim()), 3, rng),
                           random_matrix(static_cast<Eigen::Index>(p.out_dim()), 3, rng)};
    if (relu_margin(p, loss.x) < 1e3 * eps) continue;
    EXPECT_LE(finite_diff_check(p, loss, loss.gradient(p), eps), 1e-4) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 25);
}

namespace {

// Independent scalar Adam recurrence with decoupled decay.
double adam_oracle(double p, double g, double lr, double wd, int step, double& m, double& v) {
  p -= lr * wd * p;
  m = 0.9 * m + 0.1 * g;
  v = 0.999 * v + 0.001 * g * g;
  const double mhat = m / (1.0 - std::pow(0.9, step));
  const double vhat = v / (1.0 - std::pow(0.999, step));
  return p - lr * mhat / (std::sqrt(vhat) + 1e-8);
}

MlpParams scalar_param(double value) { return single_layer(Matrix::Constant(1, 1, value), Vector::Zero(1)); }

GradBuffer scalar_grad(double g) {
  GradBuffer b;
  b.layers.push_back({Matrix::Constant(1, 1, g), Vector::Zero(1)});
  return b;
}

}  // namespace

TEST(Adam, SingleStepByHand) {
  // m_hat = 0.5, v_hat = 0.25: p = 1 - 0.1 * 0.5 / (0.5 + 1e-8)
  auto p = scalar_param(1.0);
  auto s = AdamState::for_params(p);
  adam_step(p, scalar_grad(0.5), s, 0.1, 0.0);
  EXPECT_NEAR(p.layers[0].weight(0, 0), 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p.layers[0].weight(0, 0), 0.900000002, 1e-12);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, DecoupledDecayByHand) {
  // decay first: 1 - 0.1 * 0.01 * 1 = 0.999, then the same Adam delta
  auto p = scalar_param(1.0);
  auto s = AdamState::for_params(p);
  adam_step(p, scalar_grad(0.5), s, 0.1, 0.01);
  EXPECT_NEAR(p.layers[0].weight(0, 0), 0.999 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
}

TEST(Adam, MatchesScalarRecurrenceOverManySteps) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  auto p = scalar_param(0.3);
  auto s = AdamState::for_params(p);
  double ref = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 50; ++t) {
    const double g = n(rng);
    adam_step(p, scalar_grad(g), s, 0.01, 0.02);
    ref = adam_oracle(ref, g, 0.01, 0.02, t, m, v);
    ASSERT_NEAR(p.layers[0].weight(0, 0), ref, 1e-13) << "step " << t;
  }
  EXPECT_EQ(s.step, 50);
}

TEST(Adam, ZeroDecayEqualsPlainAdam) {
  double m = 0.0, v = 0.0;
  const double expected = adam_oracle(2.0, -0.7, 0.05, 0.0, 1, m, v);
  auto p = scalar_param(2.0);
  auto s = AdamState::for_params(p);
  adam_step(p, scalar_grad(-0.7), s, 0.05, 0.0);
  EXPECT_DOUBLE_EQ(p.layers[0].weight(0, 0), expected);
}

TEST(Adam, ZeroGradientWithoutDecayIsIdentity) {
  std::mt19937_64 rng(14);
  auto p = make_mlp({5, 4, 3}, Activation::relu, rng);
  const auto before = p;
  auto s = AdamState::for_params(p);
  for (int i = 0; i < 3; ++i) adam_step(p, GradBuffer::zeros_like(p), s, 1e-2, 0.0);
  EXPECT_TRUE(bit_identical(p, before));
  for (const auto& l : s.second_moment) EXPECT_GE(l.weight.minCoeff(), 0.0);
}

TEST(Adam, SecondMomentStaysNonNegative) {
  std::mt19937_64 rng(15);
  auto p = make_mlp({3, 4, 2}, Activation::relu, rng);
  auto s = AdamState::for_params(p);
  for (int i = 0; i < 10; ++i) {
    auto g = GradBuffer::zeros_like(p);
    for (auto& l : g.layers) l.weight = random_matrix(l.weight.rows(), l.weight.cols(), rng);
    adam_step(p, g, s, 1e-3, 1e-4);
  }
  for (const auto& l : s.second_moment) {
    EXPECT_GE(l.weight.minCoeff(), 0.0);
    EXPECT_GE(l.bias.minCoeff(), 0.0);
  }
}

TEST(Adam, RejectsBadInputs) {
  auto p = scalar_param(1.0);
  auto s = AdamState::for_params(p);
  EXPECT_THROW(adam_step(p, scalar_grad(std::nan("")), s, 0.1, 0.0), NumericError);
  EXPECT_THROW(adam_step(p, scalar_grad(std::numeric_limits<double>::infinity()), s, 0.1, 0.0), NumericError);
  EXPECT_THROW(adam_step(p, scalar_grad(1.0), s, 0.0, 0.0), ConfigError);
  EXPECT_THROW(adam_step(p, scalar_grad(1.0), s, 0.1, -1.0), ConfigError);
  EXPECT_THROW(adam_step(p, GradBuffer{}, s, 0.1, 0.0), ShapeError);
}

TEST(Checkpoint, JsonRoundTripIsBitIdentical) {
  std::mt19937_64 rng(16);
  const auto p = make_mlp({6, 5, 4, 2}, Activation::tanh, rng);
  const auto q = mlp_from_json(nlohmann::json::parse(to_json(p).dump()));
  EXPECT_TRUE(bit_identical(p, q));
  EXPECT_EQ(q.activations, p.activations);
}

TEST(Checkpoint, FileRoundTrip) {
  diprl::test::TempDir dir("ckpt");
  std::mt19937_64 rng(17);
  const auto p = make_mlp({3, 2}, Activation::identity, rng);
  save_mlp(dir.file("p.json"), p);
  EXPECT_TRUE(bit_identical(p, load_mlp(dir.file("p.json"))));
  EXPECT_THROW(load_mlp(dir.file("missing.json")), IoError);
}

TEST(Checkpoint, BitIdenticalDetectsOneUlpChange) {
  std::mt19937_64 rng(18);
  const auto p = make_mlp({3, 2}, Activation::identity, rng);
  auto q = p;
  q.layers[0].weight(0, 0) = std::nextafter(q.layers[0].weight(0, 0), 1e9);
  EXPECT_FALSE(bit_identical(p, q));
}
