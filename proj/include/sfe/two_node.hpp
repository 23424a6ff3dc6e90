#pragma once

// Closed-form equilibrium analysis for the two-node symmetric-producer
// family: interior split, clipping at the line limit, price formulas, cost
// comparison against efficient dispatch, the congestion-relief paradox test,
// and the capacity sweep with its analytic monotonicity summary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/errors.hpp"

namespace sfe {

struct TwoNodeScenario {
  int n1 = 0;         // producers at node 1
  int n2 = 0;         // producers at node 2
  double k1 = 0.0;    // per-producer capacity at node 1
  double k2 = 0.0;    // per-producer capacity at node 2
  double beta1 = 0.0; // node-1 marginal cost
  double beta2 = 0.0; // node-2 marginal cost
  double d1 = 0.0;    // node-1 demand
  double d2 = 0.0;    // node-2 demand
};

struct TwoNodeOutcome {
  double q1 = 0.0;
  double q2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double cost_ne = 0.0;
  double cost_eff = 0.0;
  bool braess = false;
};

inline void validate_two_node(const TwoNodeScenario& s) {
  double total = s.d1 + s.d2;
  bool ok = s.n1 >= 2 && s.n2 >= 2 && s.k1 > 0.0 && s.k2 > 0.0 &&
            s.beta1 > 0.0 && s.beta2 > s.beta1 && s.d1 > 0.0 && s.d2 > 0.0 &&
            (s.n1 - 1) * s.k1 > total && (s.n2 - 1) * s.k2 > total;
  if (!ok) throw Refusal("outside two-node closed-form regime");
}

namespace detail {

// Symmetric-node equilibrium price at nodal supply q; +inf at or beyond the
// rivals' aggregate capacity, marginal cost at zero supply.
inline double symmetric_node_price(double beta, int n, double k, double q) {
  if (q <= 0.0) return beta;
  double rivals = (n - 1) * k;
  if (q >= rivals) return kInf;
  return beta * (1.0 + (q / n) / (rivals - q));
}

}  // namespace detail

// Interior split of total demand: node-1 supply equating the two nodal
// prices, with the node-2 price extended flat at beta2 once node 2 is idle.
// Independent of the line capacity.
inline double interior_split(const TwoNodeScenario& s) {
  validate_two_node(s);
  double total = s.d1 + s.d2;
  auto resid = [&](double q1) {
    double q2 = total - q1;
    double p2 = q2 > 0.0 ? detail::symmetric_node_price(s.beta2, s.n2, s.k2, q2)
                         : s.beta2;
    return detail::symmetric_node_price(s.beta1, s.n1, s.k1, q1) - p2;
  };
  double lo = 0.0, hi = (s.n1 - 1) * s.k1 * (1.0 - 1e-13);
  // resid(0+) = beta1 - p2(total) < 0 and resid -> +inf at the right end.
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (resid(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// True iff raising the line capacity raises equilibrium cost at c: the
// node-1 price at the import-constrained split still exceeds the node-2
// price there, so the cheap node is priced out by its own local markup.
inline bool braess_condition(const TwoNodeScenario& s, double c) {
  validate_two_node(s);
  if (!(c >= 0.0)) throw InputError("shape error");
  double z1 = s.d1 - c;
  if (z1 <= 0.0) return false;
  double z2 = s.d2 + c;
  if (z2 >= (s.n2 - 1) * s.k2) return false;
  return detail::symmetric_node_price(s.beta1, s.n1, s.k1, z1) >
         detail::symmetric_node_price(s.beta2, s.n2, s.k2, z2);
}

namespace detail {

inline TwoNodeOutcome two_node_nash_at(const TwoNodeScenario& s, double split,
                                       double c) {
  double total = s.d1 + s.d2;
  TwoNodeOutcome out;
  double lb = s.d1 - c;
  double ub = total - std::max(s.d2 - c, 0.0);
  out.q1 = std::min(std::max(split, lb), ub);
  out.q2 = total - out.q1;
  if (out.q2 > 0.0) {
    out.p1 = symmetric_node_price(s.beta1, s.n1, s.k1, out.q1);
    out.p2 = symmetric_node_price(s.beta2, s.n2, s.k2, out.q2);
  } else {
    out.p1 = symmetric_node_price(s.beta1, s.n1, s.k1, total);
    out.p2 = out.p1;
  }
  out.cost_ne = s.beta1 * out.q1 + s.beta2 * out.q2;
  out.cost_eff = s.beta1 * total + (s.beta2 - s.beta1) * std::max(s.d2 - c, 0.0);
  out.braess = braess_condition(s, c);
  return out;
}

}  // namespace detail

inline TwoNodeOutcome two_node_nash(const TwoNodeScenario& s, double c) {
  validate_two_node(s);
  if (!(c >= 0.0)) throw InputError("shape error");
  return detail::two_node_nash_at(s, interior_split(s), c);
}

// Right derivative of the equilibrium cost in the line capacity.
inline double cost_derivative(const TwoNodeScenario& s, double c) {
  validate_two_node(s);
  if (!(c >= 0.0)) throw InputError("shape error");
  double split = interior_split(s);
  double total = s.d1 + s.d2;
  if (split < s.d1 - c) return s.beta2 - s.beta1;
  if (split > total - std::max(s.d2 - c, 0.0) && c < s.d2)
    return s.beta1 - s.beta2;
  return 0.0;
}

struct SweepRow {
  double c = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double cost_ne = 0.0;
  double cost_eff = 0.0;
  bool braess = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double q_tilde = 0.0;   // capacity-independent interior split
  bool has_switch = false;
  double switch_c = 0.0;  // smallest capacity beyond which cost is constant
  int direction = 0;      // cost trend before the switch: +1, -1, or 0
};

inline SweepResult capacity_sweep(const TwoNodeScenario& s, double c_min,
                                  double c_max, double step = 0.0) {
  validate_two_node(s);
  double total = s.d1 + s.d2;
  if (step == 0.0) step = 0.01 * total;
  if (!(c_min >= 0.0) || !(c_max >= c_min) || !(step > 0.0))
    throw InputError("shape error");

  SweepResult out;
  out.q_tilde = interior_split(s);
  if (out.q_tilde < s.d1) {
    out.has_switch = true;
    out.switch_c = s.d1 - out.q_tilde;
    out.direction = 1;
  } else if (out.q_tilde > s.d1) {
    out.has_switch = true;
    out.switch_c = std::min(out.q_tilde - s.d1, s.d2);
    out.direction = -1;
  }

  int steps = static_cast<int>(std::floor((c_max - c_min) / step + 1e-9));
  out.rows.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    double c = c_min + k * step;
    TwoNodeOutcome o = detail::two_node_nash_at(s, out.q_tilde, c);
    out.rows.push_back(SweepRow{c, o.q1, o.q2, o.p1, o.p2, o.cost_ne,
                                o.cost_eff, o.braess});
  }
  return out;
}

}  // namespace sfe
