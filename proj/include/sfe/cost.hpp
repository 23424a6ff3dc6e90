#pragma once

// Scalar production-cost models: linear, quadratic, and piecewise quadratic.
// Every cost is zero on (-inf, 0], convex and strictly increasing beyond.
// Closed-form antiderivatives are kept throughout so that the
// capacity-weighted transform below stays exact (no quadrature).

#include <cmath>
#include <limits>
#include <vector>

#include "sfe/errors.hpp"

namespace sfe {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Value, one-sided derivatives, and running integral of a cost at a point.
struct CostEval {
  double value = 0.0;
  double dleft = 0.0;
  double dright = 0.0;
  double integral = 0.0;  // int_0^x C(z) dz
};

// One quadratic piece in local coordinates: alpha*s^2 + beta*s for
// s in [0, length].  The final piece may have infinite length.
struct CostPiece {
  double length = kInf;
  double alpha = 0.0;
  double beta = 0.0;
};

class CostSpec {
 public:
  static CostSpec linear(double beta) {
    if (!(beta > 0.0))
      throw InputError("linear cost requires beta > 0");
    return CostSpec({{kInf, 0.0, beta}});
  }

  static CostSpec quadratic(double alpha, double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0))
      throw InputError("quadratic cost requires alpha >= 0, beta >= 0, "
                       "alpha + beta > 0");
    return CostSpec({{kInf, alpha, beta}});
  }

  static CostSpec piecewise(std::vector<CostPiece> pieces) {
    if (pieces.empty())
      throw InputError("piecewise cost requires at least one piece");
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const CostPiece& pc = pieces[k];
      if (!(pc.length > 0.0))
        throw InputError("piecewise cost piece lengths must be positive");
      if (std::isinf(pc.length) && k + 1 < pieces.size())
        throw InputError("only the final cost piece may be unbounded");
      if (!(pc.alpha >= 0.0) || !(pc.beta >= 0.0))
        throw InputError("piecewise cost coefficients must be nonnegative");
      if (k > 0) {
        const CostPiece& prev = pieces[k - 1];
        double end_slope = 2.0 * prev.alpha * prev.length + prev.beta;
        if (pc.beta < end_slope - 1e-12 * (1.0 + end_slope))
          throw InputError("piecewise cost must have nondecreasing slope");
      }
    }
    if (!(pieces[0].alpha + pieces[0].beta > 0.0))
      throw InputError("cost must be strictly positive for x > 0");
    return CostSpec(std::move(pieces));
  }

  // Value, one-sided derivatives, and integral at x.  Beyond the final
  // finite piece the last quadratic is extended indefinitely.
  CostEval eval(double x) const {
    CostEval out;
    if (x < 0.0) return out;
    if (x == 0.0) {
      out.dright = pieces_[0].beta;
      return out;
    }
    std::size_t k = 0;
    while (k + 1 < pieces_.size() && x > start_[k] + pieces_[k].length)
      ++k;
    const CostPiece& pc = pieces_[k];
    double s = x - start_[k];
    double d = 2.0 * pc.alpha * s + pc.beta;
    out.value = value0_[k] + pc.alpha * s * s + pc.beta * s;
    out.integral = integral0_[k] + value0_[k] * s + pc.alpha * s * s * s / 3.0
                   + pc.beta * s * s / 2.0;
    out.dright = d;
    if (s == 0.0 && k > 0) {
      const CostPiece& prev = pieces_[k - 1];
      out.dleft = 2.0 * prev.alpha * prev.length + prev.beta;
    } else {
      out.dleft = d;
    }
    // A join falling strictly inside float spacing of x keeps dleft = dright;
    // one-sided values differ only exactly at the stored breakpoints.
    if (k + 1 < pieces_.size() && x == start_[k] + pc.length) {
      out.dright = pieces_[k + 1].beta;
      out.dleft = d;
    }
    return out;
  }

  const std::vector<CostPiece>& pieces() const { return pieces_; }

  // Global x-coordinates of slope discontinuities (used to seed solver
  // grids); joins with matching slopes are not kinks but are harmless.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < pieces_.size(); ++k)
      out.push_back(start_[k] + pieces_[k].length);
    return out;
  }

 private:
  explicit CostSpec(std::vector<CostPiece> pieces)
      : pieces_(std::move(pieces)) {
    start_.resize(pieces_.size());
    value0_.resize(pieces_.size());
    integral0_.resize(pieces_.size());
    double x = 0.0, v = 0.0, in = 0.0;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      start_[k] = x;
      value0_[k] = v;
      integral0_[k] = in;
      const CostPiece& pc = pieces_[k];
      if (std::isinf(pc.length)) break;
      double L = pc.length;
      in += v * L + pc.alpha * L * L * L / 3.0 + pc.beta * L * L / 2.0;
      v += pc.alpha * L * L + pc.beta * L;
      x += L;
    }
  }

  std::vector<CostPiece> pieces_;
  std::vector<double> start_, value0_, integral0_;  // cumulative offsets
};

inline CostEval cost_eval(const CostSpec& cost, double x) {
  return cost.eval(x);
}

// A producer: attachment node, truthful capacity, and private cost.
struct Producer {
  int node = 0;
  double capacity = 0.0;
  CostSpec cost = CostSpec::linear(1.0);
};

// Quantity a producer with capacity X and bid theta offers at price p.
// May be negative pre-equilibrium.
inline double supply_function(double capacity, double theta, double p) {
  if (!(p > 0.0)) throw InputError("nonpositive price");
  return capacity - theta / p;
}

// Cost reported to the dispatcher by a bid: the integral of the inverse
// supply function.  Diverges as x approaches capacity when theta > 0.
inline double reported_cost(double capacity, double theta, double x) {
  if (x >= capacity) throw InputError("capacity exceeded (log barrier)");
  if (theta == 0.0) return 0.0;
  return theta * std::log(capacity / (capacity - x));
}

inline double reported_cost_derivative(double capacity, double theta,
                                       double x) {
  if (x >= capacity) throw InputError("capacity exceeded (log barrier)");
  return theta / (capacity - x);
}

struct ModifiedCostEval {
  double value = 0.0;
  double dleft = 0.0;
  double dright = 0.0;
};

// Capacity-weighted cost transform.  R is the rival capacity remaining at
// the producer's node after meeting the nodal target:
//   Cmod(x) = (1 + x/R) C(x) - (1/R) int_0^x C,
// with one-sided derivatives dC(x) * (1 + x/R).  Strictly convex and
// increasing on [0, capacity]; identically zero for x <= 0.
inline ModifiedCostEval modified_cost(const CostSpec& cost, double x,
                                      double residual_capacity) {
  if (!(residual_capacity > 0.0))
    throw Refusal("pivotal-supplier regime: modified cost undefined");
  ModifiedCostEval out;
  if (x < 0.0) return out;
  CostEval ce = cost.eval(x);
  double w = 1.0 + x / residual_capacity;
  if (x > 0.0)
    out.value = w * ce.value - ce.integral / residual_capacity;
  out.dleft = ce.dleft * w;
  out.dright = ce.dright * w;
  return out;
}

}  // namespace sfe
