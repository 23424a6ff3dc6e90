#include "sfe/cost.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/test_util.hpp"

using sfe::CostPiece;
using sfe::CostSpec;
using sfe::InputError;
using sfe::Refusal;
using sfe::kInf;

TEST(Cost, LinearEval) {
  CostSpec c = CostSpec::linear(2.5);
  sfe::CostEval e = c.eval(1.2);
  EXPECT_DOUBLE_EQ(e.value, 3.0);
  EXPECT_DOUBLE_EQ(e.dleft, 2.5);
  EXPECT_DOUBLE_EQ(e.dright, 2.5);
  EXPECT_DOUBLE_EQ(e.integral, 2.5 * 1.2 * 1.2 / 2.0);
}

TEST(Cost, QuadraticEval) {
  CostSpec c = CostSpec::quadratic(0.5, 1.5);
  sfe::CostEval e = c.eval(0.8);
  EXPECT_DOUBLE_EQ(e.value, 0.5 * 0.64 + 1.5 * 0.8);
  EXPECT_DOUBLE_EQ(e.dleft, 2.0 * 0.5 * 0.8 + 1.5);
  EXPECT_DOUBLE_EQ(e.dright, e.dleft);
  EXPECT_NEAR(e.integral, 0.5 * 0.8 * 0.8 * 0.8 / 3.0 + 1.5 * 0.64 / 2.0,
              1e-15);
}

TEST(Cost, ZeroAndNegativeArguments) {
  CostSpec c = CostSpec::quadratic(0.5, 1.5);
  sfe::CostEval e0 = c.eval(0.0);
  EXPECT_DOUBLE_EQ(e0.value, 0.0);
  EXPECT_DOUBLE_EQ(e0.dleft, 0.0);   // flat extension on the left
  EXPECT_DOUBLE_EQ(e0.dright, 1.5);  // marginal cost at startup
  EXPECT_DOUBLE_EQ(e0.integral, 0.0);
  sfe::CostEval en = c.eval(-0.3);
  EXPECT_DOUBLE_EQ(en.value, 0.0);
  EXPECT_DOUBLE_EQ(en.dleft, 0.0);
  EXPECT_DOUBLE_EQ(en.dright, 0.0);
}

TEST(Cost, PiecewiseJoinsAndIntegral) {
  // slope 1 on [0, 0.4], slope 3 beyond
  CostSpec c = CostSpec::piecewise({{0.4, 0.0, 1.0}, {kInf, 0.0, 3.0}});
  sfe::CostEval at_kink = c.eval(0.4);
  EXPECT_DOUBLE_EQ(at_kink.value, 0.4);
  EXPECT_DOUBLE_EQ(at_kink.dleft, 1.0);
  EXPECT_DOUBLE_EQ(at_kink.dright, 3.0);
  sfe::CostEval past = c.eval(0.7);
  EXPECT_NEAR(past.value, 0.4 + 3.0 * 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(past.dleft, 3.0);
  EXPECT_DOUBLE_EQ(past.dright, 3.0);
  EXPECT_NEAR(past.integral, 0.08 + 0.4 * 0.3 + 1.5 * 0.09, 1e-15);
  ASSERT_EQ(c.breakpoints().size(), 1u);
  EXPECT_DOUBLE_EQ(c.breakpoints()[0], 0.4);
}

TEST(Cost, PiecewiseFinalPieceExtendsBeyondLength) {
  CostSpec c = CostSpec::piecewise({{0.5, 0.0, 2.0}, {1.0, 0.0, 4.0}});
  // beyond the last finite piece the last quadratic keeps going
  sfe::CostEval e = c.eval(2.0);
  EXPECT_NEAR(e.value, 1.0 + 4.0 * 1.5, 1e-15);
  EXPECT_DOUBLE_EQ(e.dright, 4.0);
}

TEST(Cost, ValidationErrors) {
  EXPECT_THROW_MSG(CostSpec::linear(0.0), InputError, "beta > 0");
  EXPECT_THROW_MSG(CostSpec::linear(-1.0), InputError, "beta > 0");
  EXPECT_THROW_MSG(CostSpec::quadratic(-0.1, 1.0), InputError, "alpha >= 0");
  EXPECT_THROW_MSG(CostSpec::quadratic(0.0, 0.0), InputError,
                   "alpha + beta > 0");
  EXPECT_THROW_MSG(CostSpec::piecewise({}), InputError, "at least one piece");
  EXPECT_THROW_MSG(CostSpec::piecewise({{0.0, 0.0, 1.0}}), InputError,
                   "lengths must be positive");
  EXPECT_THROW_MSG(CostSpec::piecewise({{kInf, 0.0, 1.0}, {kInf, 0.0, 2.0}}),
                   InputError, "only the final cost piece");
  EXPECT_THROW_MSG(CostSpec::piecewise({{0.4, 0.0, 3.0}, {kInf, 0.0, 1.0}}),
                   InputError, "nondecreasing slope");
  EXPECT_THROW_MSG(CostSpec::piecewise({{0.4, 0.0, 0.0}, {kInf, 0.0, 1.0}}),
                   InputError, "strictly positive");
  EXPECT_THROW_MSG(CostSpec::piecewise({{0.4, -0.1, 1.0}, {kInf, 0.0, 3.0}}),
                   InputError, "nonnegative");
}

TEST(Cost, SupplyFunction) {
  EXPECT_DOUBLE_EQ(sfe::supply_function(2.0, 1.0, 2.0), 1.5);
  EXPECT_DOUBLE_EQ(sfe::supply_function(2.0, 0.0, 5.0), 2.0);
  // withheld below the implied price floor: may be negative pre-clearing
  EXPECT_LT(sfe::supply_function(2.0, 10.0, 1.0), 0.0);
  EXPECT_THROW_MSG(sfe::supply_function(2.0, 1.0, 0.0), InputError,
                   "nonpositive price");
  EXPECT_THROW_MSG(sfe::supply_function(2.0, 1.0, -1.0), InputError,
                   "nonpositive price");
}

TEST(Cost, ReportedCostLogBarrier) {
  double v = sfe::reported_cost(2.0, 0.5, 1.0);
  EXPECT_NEAR(v, 0.5 * std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(sfe::reported_cost(2.0, 0.0, 1.999), 0.0);
  EXPECT_NEAR(sfe::reported_cost_derivative(2.0, 0.5, 1.0), 0.5, 1e-15);
  EXPECT_THROW_MSG(sfe::reported_cost(2.0, 0.5, 2.0), InputError,
                   "capacity exceeded (log barrier)");
  EXPECT_THROW_MSG(sfe::reported_cost_derivative(2.0, 0.5, 2.5), InputError,
                   "capacity exceeded (log barrier)");
}

TEST(Cost, ModifiedCostClosedForm) {
  // quadratic 0.5 x^2 + 1.5 x at x = 0.5 with residual 0.3
  CostSpec c = CostSpec::quadratic(0.5, 1.5);
  sfe::ModifiedCostEval m = sfe::modified_cost(c, 0.5, 0.3);
  double w = 1.0 + 0.5 / 0.3;
  double val = c.eval(0.5).value;
  double integ = 0.5 * 0.125 / 3.0 + 1.5 * 0.25 / 2.0;
  EXPECT_NEAR(m.value, w * val - integ / 0.3, 1e-14);
  EXPECT_NEAR(m.dleft, 2.0 * w, 1e-14);
  EXPECT_NEAR(m.dright, 2.0 * w, 1e-14);
}

TEST(Cost, ModifiedCostSandwich) {
  // C(x) <= Cmod(x) <= (1 + x/R) C(x): the subtracted mean term is between
  // zero and (x/R) C(x) because C is nondecreasing.
  CostSpec c = CostSpec::piecewise({{0.4, 0.2, 1.0}, {kInf, 0.1, 1.5}});
  double R = 0.7;
  for (double x : {0.05, 0.25, 0.4, 0.55, 0.9}) {
    double base = c.eval(x).value;
    sfe::ModifiedCostEval m = sfe::modified_cost(c, x, R);
    EXPECT_GE(m.value, base - 1e-12);
    EXPECT_LE(m.value, (1.0 + x / R) * base + 1e-12);
    EXPECT_GE(m.dleft, c.eval(x).dleft - 1e-12);
    EXPECT_LE(m.dleft, m.dright + 1e-12);
  }
}

TEST(Cost, ModifiedCostZeroBelowOrigin) {
  CostSpec c = CostSpec::linear(2.0);
  sfe::ModifiedCostEval m = sfe::modified_cost(c, -0.2, 0.5);
  EXPECT_DOUBLE_EQ(m.value, 0.0);
  EXPECT_DOUBLE_EQ(m.dleft, 0.0);
  EXPECT_DOUBLE_EQ(m.dright, 0.0);
}

TEST(Cost, ModifiedCostRefusesNonpositiveResidual) {
  CostSpec c = CostSpec::linear(2.0);
  EXPECT_THROW_MSG(sfe::modified_cost(c, 0.5, 0.0), Refusal,
                   "pivotal-supplier regime");
  EXPECT_THROW_MSG(sfe::modified_cost(c, 0.5, -0.1), Refusal,
                   "pivotal-supplier regime");
}
