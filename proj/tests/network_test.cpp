#include "sfe/network.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <vector>

#include "support/test_util.hpp"

using sfe::InputError;
using sfe::LineSpec;
using sfe::NetworkModel;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST(Network, TwoNodeShiftFactors) {
  NetworkModel net =
      sfe::build_network({{0, 1, 0.4, std::nullopt}}, vec2(1.0, 1.0), 0);
  EXPECT_EQ(net.node_count, 2);
  EXPECT_EQ(net.line_count, 1);
  ASSERT_EQ(net.shift_factor.rows(), 2);
  EXPECT_NEAR(net.shift_factor(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(net.shift_factor(0, 1), -1.0, 1e-14);
  EXPECT_NEAR(net.shift_factor(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(net.shift_factor(1, 1), 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(net.line_capacity[0], 0.4);
  EXPECT_DOUBLE_EQ(net.line_capacity[1], 0.4);
}

TEST(Network, RingShiftFactors) {
  // equal reactances on a 3-cycle: flows split 2:1 between the direct edge
  // and the two-hop path
  NetworkModel net = sfe::build_network(
      {{0, 1, 1.0, std::nullopt}, {1, 2, 1.0, std::nullopt},
       {2, 0, 1.0, std::nullopt}},
      vec3(0.8, 0.8, 0.8), 0);
  Eigen::MatrixXd F = net.shift_factor.topRows(3);
  Eigen::MatrixXd expect(3, 3);
  expect << 0, -2.0 / 3.0, -1.0 / 3.0,
            0,  1.0 / 3.0, -1.0 / 3.0,
            0,  1.0 / 3.0,  2.0 / 3.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      EXPECT_NEAR(F(r, c), expect(r, c), 1e-12) << "entry " << r << "," << c;
  // lower block mirrors the upper
  EXPECT_NEAR((net.shift_factor.bottomRows(3) + F).norm(), 0.0, 1e-12);
}

TEST(Network, BalancedFlowsIndependentOfSlack) {
  std::vector<LineSpec> lines = {{0, 1, 1.0, 0.7},
                                 {1, 2, 1.0, 1.3},
                                 {2, 0, 1.0, 2.1},
                                 {1, 3, 1.0, 0.9}};
  Eigen::VectorXd d(4);
  d << 0.5, 0.4, 0.3, 0.2;
  NetworkModel a = sfe::build_network(lines, d, 0);
  NetworkModel b = sfe::build_network(lines, d, 3);
  Eigen::VectorXd y(4);
  y << 0.6, -0.2, -0.5, 0.1;  // balanced injection
  Eigen::VectorXd fa = a.shift_factor.topRows(4) * y;
  Eigen::VectorXd fb = b.shift_factor.topRows(4) * y;
  EXPECT_NEAR((fa - fb).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  // the slack column is identically zero
  EXPECT_NEAR(a.shift_factor.col(0).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  EXPECT_NEAR(b.shift_factor.col(3).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Network, ParallelLinesSplitFlow) {
  NetworkModel net = sfe::build_network(
      {{0, 1, 0.5, std::nullopt}, {0, 1, 0.5, std::nullopt}}, vec2(1.0, 1.0),
      0);
  EXPECT_NEAR(net.shift_factor(0, 1), -0.5, 1e-14);
  EXPECT_NEAR(net.shift_factor(1, 1), -0.5, 1e-14);
}

TEST(Network, ZeroCapacityLineStillConnects) {
  NetworkModel net =
      sfe::build_network({{0, 1, 0.0, std::nullopt}}, vec2(1.0, 1.0), 0);
  EXPECT_TRUE(sfe::injection_feasible(net, vec2(0.0, 0.0)));
  EXPECT_FALSE(sfe::injection_feasible(net, vec2(0.1, -0.1)));
}

TEST(Network, SingleNodeNoLines) {
  Eigen::VectorXd d(1);
  d << 1.5;
  NetworkModel net = sfe::build_network({}, d, 0);
  EXPECT_EQ(net.node_count, 1);
  EXPECT_EQ(net.line_count, 0);
  Eigen::VectorXd y0(1), y1(1);
  y0 << 0.0;
  y1 << 0.1;
  EXPECT_TRUE(sfe::injection_feasible(net, y0));
  EXPECT_FALSE(sfe::injection_feasible(net, y1));  // unbalanced
}

TEST(Network, InjectionFeasibility) {
  NetworkModel net =
      sfe::build_network({{0, 1, 0.4, std::nullopt}}, vec2(1.0, 1.0), 0);
  EXPECT_TRUE(sfe::injection_feasible(net, vec2(0.4, -0.4)));
  EXPECT_TRUE(sfe::injection_feasible(net, vec2(-0.3, 0.3)));
  EXPECT_FALSE(sfe::injection_feasible(net, vec2(0.5, -0.5)));
  EXPECT_FALSE(sfe::injection_feasible(net, vec2(0.1, 0.1)));  // unbalanced
  EXPECT_THROW_MSG(sfe::injection_feasible(net, vec3(0, 0, 0)), InputError,
                   "shape error");
}

TEST(Network, DisconnectedGraphRejected) {
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, std::nullopt}}, vec3(1, 1, 1), 0),
      InputError, "disconnected network");
}

TEST(Network, ReactanceValidation) {
  // mixing explicit and default reactances is rejected
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, 0.5}, {1, 2, 1.0, std::nullopt}},
                         vec3(1, 1, 1), 0),
      InputError, "invalid reactance");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, 0.0}}, vec2(1, 1), 0), InputError,
      "invalid reactance");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, -2.0}}, vec2(1, 1), 0), InputError,
      "invalid reactance");
}

TEST(Network, ShapeErrors) {
  EXPECT_THROW_MSG(sfe::build_network({}, Eigen::VectorXd(0), 0), InputError,
                   "shape error");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, std::nullopt}}, vec2(1, 1), 2),
      InputError, "shape error");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 0, 1.0, std::nullopt}}, vec2(1, 1), 0),
      InputError, "shape error");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, -1.0, std::nullopt}}, vec2(1, 1), 0),
      InputError, "shape error");
  EXPECT_THROW_MSG(
      sfe::build_network({{0, 1, 1.0, std::nullopt}}, vec2(1, -1), 0),
      InputError, "shape error");
  // direct construction: row count must be even and match capacities
  Eigen::MatrixXd H(3, 2);
  H.setZero();
  Eigen::VectorXd c3 = vec3(1, 1, 1);
  EXPECT_THROW_MSG(sfe::make_network(H, c3, vec2(1, 1)), InputError,
                   "shape error");
  Eigen::MatrixXd H2(2, 2);
  H2.setZero();
  EXPECT_THROW_MSG(sfe::make_network(H2, vec2(-0.1, 1), vec2(1, 1)),
                   InputError, "shape error");
}
