#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cfrl/error.hpp"
#include "cfrl/neuralnet.hpp"
#include "support/oracles.hpp"

using namespace cfrl;

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Loss L = c . f(x); checks parameter and input gradients against central differences.
void gradient_check(const std::vector<int>& dims, Activation hidden, Activation out, std::uint64_t seed) {
  Rng rng(seed);
  DenseNet net = DenseNet::make(dims, hidden, out, rng);
  // Larger output weights so the output layer is not numerically negligible.
  std::normal_distribution<double> n(0.0, 0.5);
  for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()(i) = n(rng);
  Eigen::VectorXd x(dims.front()), c(dims.back());
  for (auto& v : x) v = n(rng);
  for (auto& v : c) v = n(rng);

  const auto g = net.backward(x, c);
  const auto fd_params = oracle::central_difference(
      [&](const std::vector<double>& p) {
        DenseNet m = net;
        m.params() = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
        return c.dot(m.forward(x));
      },
      to_std(net.params()));
  const auto fd_input = oracle::central_difference(
      [&](const std::vector<double>& xi) {
        return c.dot(net.forward(Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<Eigen::Index>(xi.size()))));
      },
      to_std(x));
  EXPECT_LT(oracle::max_relative_error(to_std(g.params), fd_params), 1e-4);
  EXPECT_LT(oracle::max_relative_error(to_std(g.input), fd_input), 1e-4);
}

}  // namespace

TEST(DenseNet, ZeroNetGivesZero) {
  DenseNet net({3, 5, 2}, Activation::kRelu, Activation::kIdentity);
  EXPECT_TRUE(net.forward(Eigen::Vector3d(1.0, -2.0, 3.0)).isZero());
}

TEST(DenseNet, IdentityLayerPassesInput) {
  DenseNet net({3, 3}, Activation::kRelu, Activation::kIdentity);
  net.weights(0).setIdentity();
  const Eigen::Vector3d x(0.5, -1.5, 2.0);
  EXPECT_EQ(net.forward(x), x);
}

TEST(DenseNet, HandSetOneOneOne) {
  DenseNet net({1, 1, 1}, Activation::kRelu, Activation::kIdentity);
  net.weights(0)(0, 0) = 2.0;
  net.bias(0)(0) = -1.0;
  net.weights(1)(0, 0) = 3.0;
  EXPECT_DOUBLE_EQ(net.forward(Eigen::VectorXd::Ones(1))(0), 3.0);
}

TEST(DenseNet, ShapeErrors) {
  DenseNet net({3, 4, 1}, Activation::kRelu, Activation::kTanh);
  try {
    net.forward(Eigen::VectorXd::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
  EXPECT_THROW(net.backward(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2)), Error);
}

TEST(DenseNet, ZeroUpstreamGradientGivesZero) {
  Rng rng(1);
  auto net = DenseNet::make({3, 6, 2}, Activation::kRelu, Activation::kTanh, rng);
  const auto g = net.backward(Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector2d::Zero());
  EXPECT_TRUE(g.params.isZero());
  EXPECT_TRUE(g.input.isZero());
}

TEST(DenseNet, LinearLayerGradients) {
  DenseNet net({2, 3}, Activation::kRelu, Activation::kIdentity);
  net.weights(0) << 1, 2, 3, 4, 5, 6;
  const Eigen::Vector2d x(0.5, -1.0);
  const Eigen::Vector3d dy(1.0, 0.0, 2.0);
  const auto g = net.backward(x, dy);
  // dL/dW = dy x^T (column-major storage), dL/db = dy, dL/dx = W^T dy.
  const Eigen::MatrixXd dW = dy * x.transpose();
  EXPECT_TRUE(Eigen::Map<const Eigen::MatrixXd>(g.params.data(), 3, 2).isApprox(dW));
  EXPECT_TRUE(g.params.tail(3).isApprox(dy));
  EXPECT_TRUE(g.input.isApprox(net.weights(0).transpose() * dy));
}

TEST(DenseNet, ReluSubgradientAtZeroIsZero) {
  DenseNet net({1, 1, 1}, Activation::kRelu, Activation::kIdentity);
  net.weights(0)(0, 0) = 1.0;
  net.weights(1)(0, 0) = 1.0;
  const auto g = net.backward(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  EXPECT_EQ(g.input(0), 0.0);
}

TEST(DenseNet, GradientCheckAllShapes) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    gradient_check({3, 30, 1}, Activation::kRelu, Activation::kTanh, s);
    gradient_check({4, 30, 1}, Activation::kRelu, Activation::kIdentity, s);
    gradient_check({30, 100, 1}, Activation::kRelu, Activation::kTanh, s);
    gradient_check({31, 100, 1}, Activation::kRelu, Activation::kIdentity, s);
    gradient_check({5, 7, 6, 3}, Activation::kTanh, Activation::kIdentity, s);
  }
}

TEST(DenseNet, BatchMatchesSingle) {
  Rng rng(5);
  auto net = DenseNet::make({3, 8, 2}, Activation::kRelu, Activation::kTanh, rng);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 4);
  Eigen::MatrixXd dY = Eigen::MatrixXd::Random(2, 4);
  ForwardCache cache;
  const Eigen::MatrixXd Y = net.forward_batch(X, &cache);
  Eigen::MatrixXd dX;
  const Eigen::VectorXd g = net.backward_batch(cache, dY, &dX);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(g.size());
  for (int k = 0; k < 4; ++k) {
    EXPECT_TRUE(Y.col(k).isApprox(net.forward(X.col(k))));
    const auto gk = net.backward(X.col(k), dY.col(k));
    sum += gk.params;
    EXPECT_TRUE(dX.col(k).isApprox(gk.input));
  }
  EXPECT_TRUE(g.isApprox(sum));
}

TEST(DenseNet, InitialisationRanges) {
  Rng rng(9);
  auto net = DenseNet::make({3, 30, 1}, Activation::kRelu, Activation::kTanh, rng);
  EXPECT_LE(net.weights(0).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(3.0));
  EXPECT_LE(net.weights(1).cwiseAbs().maxCoeff(), 3e-3);
  EXPECT_LE(net.bias(1).cwiseAbs().maxCoeff(), 3e-3);
}

TEST(SoftUpdate, GeometricContraction) {
  Rng rng(2);
  auto main = DenseNet::make({3, 10, 1}, Activation::kRelu, Activation::kTanh, rng);
  auto target = DenseNet::make({3, 10, 1}, Activation::kRelu, Activation::kTanh, rng);
  const double d0 = (target.params() - main.params()).norm();
  for (int k = 1; k <= 200; ++k) {
    soft_update(target, main, 0.01);
    const double dk = (target.params() - main.params()).norm();
    EXPECT_NEAR(dk, std::pow(0.99, k) * d0, 1e-12 * d0);
  }
  soft_update(target, main, 1.0);
  EXPECT_EQ(target.params(), main.params());
}

TEST(Adam, ZeroGradientLeavesParams) {
  AdamState st(3, {});
  Eigen::VectorXd p(3);
  p << 1, 2, 3;
  const Eigen::VectorXd before = p;
  adam_step(st, p, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepIsLearningRate) {
  AdamState st(2, {.learning_rate = 5e-4});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 0.7, -20.0;
  adam_step(st, p, g);
  EXPECT_NEAR(p(0), -5e-4, 1e-9);
  EXPECT_NEAR(p(1), 5e-4, 1e-9);
}

TEST(Adam, DeterministicAndDivergence) {
  AdamState a(2, {}), b(2, {});
  Eigen::VectorXd pa = Eigen::VectorXd::Ones(2), pb = pa;
  const Eigen::Vector2d g(0.3, -0.1);
  adam_step(a, pa, g);
  adam_step(b, pb, g);
  EXPECT_EQ(pa, pb);
  try {
    adam_step(a, pa, Eigen::Vector2d(NAN, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
  }
}

TEST(DenseNetJson, RoundTrip) {
  Rng rng(4);
  auto net = DenseNet::make({4, 30, 1}, Activation::kRelu, Activation::kIdentity, rng);
  const auto back = dense_net_from_json(nlohmann::json::parse(to_json(net).dump()));
  EXPECT_TRUE(back.same_shape(net));
  EXPECT_EQ(back.params(), net.params());
  EXPECT_EQ(to_json(net)["format"], "cfrl-densenet");
}

TEST(DenseNetJson, RejectsBrokenChain) {
  Rng rng(4);
  auto j = to_json(DenseNet::make({3, 5, 1}, Activation::kRelu, Activation::kTanh, rng));
  j["layers"][1]["in"] = 4;
  EXPECT_THROW(dense_net_from_json(j), Error);
}
