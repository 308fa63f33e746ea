#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "uavlora/error.hpp"
#include "uavlora/mlp.hpp"

using namespace uavlora;

TEST_CASE("parameter layout") {
  const Mlp net({4, 3, 2});
  CHECK(net.num_params() == 4 * 3 + 3 + 3 * 2 + 2);
  CHECK(net.num_layers() == 2);
  CHECK(net.input_size() == 4);
  CHECK(net.output_size() == 2);
  CHECK_THROWS_AS(Mlp({4}), Error);
  CHECK_THROWS_AS(Mlp({4, 0, 2}), Error);
}

TEST_CASE("orthogonal initialisation") {
  std::mt19937_64 rng(1);
  Mlp net({10, 16, 16, 4});
  net.init_orthogonal(rng, 2.0, 0.5);
  const Eigen::MatrixXd w0 = net.weight(0);
  CHECK((w0.transpose() * w0 - 4.0 * Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-10);
  const Eigen::MatrixXd w1 = net.weight(1);
  CHECK((w1 * w1.transpose() - 4.0 * Eigen::MatrixXd::Identity(16, 16)).norm() < 1e-10);
  const Eigen::MatrixXd w2 = net.weight(2);
  CHECK((w2 * w2.transpose() - 0.25 * Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);
  CHECK(net.bias(1).norm() == 0.0);
}

TEST_CASE("forward rejects the wrong input width") {
  const Mlp net({3, 2});
  CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(4)), Error);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(2, 5), nullptr), Error);
}

TEST_CASE("single sample and batch forward agree") {
  std::mt19937_64 rng(2);
  Mlp net({5, 8, 3});
  net.init_orthogonal(rng, 1.4, 1.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 7);
  const Eigen::MatrixXd y = net.forward(x, nullptr);
  for (int j = 0; j < 7; ++j) CHECK((net.forward(Eigen::VectorXd(x.col(j))) - y.col(j)).norm() < 1e-14);
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 rng(3);
  Mlp net({6, 9, 7, 4});
  net.init_orthogonal(rng, 1.4, 1.0);
  net.params() += 0.05 * Eigen::VectorXd::Random(static_cast<Eigen::Index>(net.num_params()));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 5);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Random(4, 5);
  Mlp::Cache cache;
  net.forward(x, &cache);
  const Eigen::VectorXd grad = net.backward(cache, w);
  auto f = [&](const Eigen::VectorXd& p) {
    Mlp probe = net;
    probe.params() = p;
    return (probe.forward(x, nullptr).array() * w.array()).sum();
  };
  CHECK(testing::gradient_error(f, net.params(), grad) < 1e-6);
}

TEST_CASE("adam descends a quadratic") {
  Eigen::VectorXd x(3);
  x << 3.0, -2.0, 1.0;
  Adam opt(3, 0.05);
  for (int i = 0; i < 2000; ++i) opt.step(x, 2.0 * x);
  CHECK(x.norm() < 1e-2);
  CHECK_THROWS_AS(opt.step(x, Eigen::VectorXd::Zero(2)), Error);
}
