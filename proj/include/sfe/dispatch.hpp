#pragma once

// Dispatch layer: efficient (true-cost) dispatch, the closed-form nodal
// allocation and pricing rules for bid-reported costs, and reported-cost
// dispatch over the network.

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/errors.hpp"
#include "sfe/network.hpp"
#include "sfe/solver.hpp"

namespace sfe {

struct DispatchOutcome {
  Eigen::VectorXd x;   // per producer
  Eigen::VectorXd q;   // per node
  Eigen::VectorXd p;   // per node, equals lambda - H'mu
  double lambda = 0.0;
  Eigen::VectorXd mu;  // per shift-factor row
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::optimal;
  bool negative_allocation = false;
};

inline void validate_producers(const NetworkModel& net,
                               const std::vector<Producer>& producers) {
  for (const Producer& pr : producers) {
    if (pr.node < 0 || pr.node >= net.node_count || !(pr.capacity >= 0.0))
      throw InputError("shape error");
  }
}

inline std::vector<std::vector<int>> producers_by_node(
    const NetworkModel& net, const std::vector<Producer>& producers) {
  std::vector<std::vector<int>> at(net.node_count);
  for (std::size_t j = 0; j < producers.size(); ++j)
    at[producers[j].node].push_back(static_cast<int>(j));
  return at;
}

inline ScalarConvex true_cost_part(const Producer& pr) {
  const CostSpec* cs = &pr.cost;
  return ScalarConvex{pr.capacity,
                      [cs](double x) { return cs->eval(x).dleft; },
                      [cs](double x) { return cs->eval(x).dright; }};
}

// Minimizes total true production cost subject to capacities and network
// limits; prices are the dispatch duals.
inline DispatchOutcome efficient_dispatch(const NetworkModel& net,
                                          const std::vector<Producer>& producers,
                                          const SolveOptions& opt = SolveOptions()) {
  validate_producers(net, producers);
  auto at = producers_by_node(net, producers);
  std::vector<std::vector<ScalarConvex>> parts(net.node_count);
  for (int i = 0; i < net.node_count; ++i)
    for (int j : at[i]) parts[i].push_back(true_cost_part(producers[j]));

  AggregatedResult agg;
  try {
    agg = solve_polytope_aggregated(parts, net, opt);
  } catch (const Refusal&) {
    throw Refusal("demand cannot be met");
  }

  DispatchOutcome out;
  out.q = agg.nodal.minimizer;
  out.lambda = agg.nodal.lambda;
  out.mu = agg.nodal.mu;
  out.status = agg.nodal.status;
  out.x.resize(static_cast<int>(producers.size()));
  for (int i = 0; i < net.node_count; ++i)
    for (std::size_t k = 0; k < at[i].size(); ++k)
      out.x[at[i][k]] = agg.allocation[i][static_cast<int>(k)];
  out.p.resize(net.node_count);
  for (int i = 0; i < net.node_count; ++i) {
    out.p[i] = out.lambda;
    if (net.line_capacity.size() > 0)
      out.p[i] -= net.shift_factor.col(i).dot(out.mu);
  }
  out.objective_value = 0.0;
  for (std::size_t j = 0; j < producers.size(); ++j)
    out.objective_value += producers[j].cost.eval(out.x[static_cast<int>(j)]).value;
  return out;
}

// Closed-form allocation of a nodal total across the node's producers under
// reported costs: proportional to residual bids when total bid is positive,
// proportional to capacity when every local bid is zero.
inline Eigen::VectorXd local_allocation(const Eigen::VectorXd& caps,
                                        const Eigen::VectorXd& theta,
                                        double q_i) {
  if (caps.size() != theta.size()) throw InputError("shape error");
  if (caps.size() == 0) {
    if (q_i != 0.0) throw Refusal("supply at empty node");
    return Eigen::VectorXd(0);
  }
  for (int j = 0; j < theta.size(); ++j)
    if (!(theta[j] >= 0.0)) throw InputError("shape error");
  double cap_sum = caps.sum();
  double theta_sum = theta.sum();
  Eigen::VectorXd x(caps.size());
  if (theta_sum > 0.0) {
    for (int j = 0; j < caps.size(); ++j)
      x[j] = caps[j] - (theta[j] / theta_sum) * (cap_sum - q_i);
  } else {
    if (cap_sum <= 0.0) {
      if (q_i != 0.0) throw Refusal("target exceeds node capacity");
      return Eigen::VectorXd::Zero(caps.size());
    }
    for (int j = 0; j < caps.size(); ++j) x[j] = (caps[j] / cap_sum) * q_i;
  }
  return x;
}

// Market-clearing price at a node: total bid over residual capacity.
inline double nodal_price(const Eigen::VectorXd& caps,
                          const Eigen::VectorXd& theta, double q_i) {
  if (caps.size() != theta.size()) throw InputError("shape error");
  double theta_sum = theta.size() > 0 ? theta.sum() : 0.0;
  if (theta_sum <= 0.0) return 0.0;
  double cap_sum = caps.sum();
  if (q_i >= cap_sum) throw Refusal("price undefined at full capacity");
  return theta_sum / (cap_sum - q_i);
}

// Total reported cost at a node as a function of its supply target
// (closed form; the allocation itself is local_allocation).
inline double reported_node_value(const Eigen::VectorXd& caps,
                                  const Eigen::VectorXd& theta, double z) {
  double theta_sum = theta.size() > 0 ? theta.sum() : 0.0;
  if (theta_sum <= 0.0) return 0.0;
  double cap_sum = caps.sum();
  if (z >= cap_sum) throw Refusal("price undefined at full capacity");
  double v = 0.0;
  for (int j = 0; j < caps.size(); ++j) {
    if (theta[j] <= 0.0) continue;
    v += theta[j] *
         std::log(caps[j] * theta_sum / (theta[j] * (cap_sum - z)));
  }
  return v;
}

// Dispatch under the bid-reported costs.  Nodal objectives are the smooth
// closed forms above; nodes whose bids sum to zero have flat objectives and
// are resolved to the minimum-norm optimal supply for determinism (the duals
// of the original solve are kept).
inline DispatchOutcome reported_dispatch(const NetworkModel& net,
                                         const std::vector<Producer>& producers,
                                         const Eigen::VectorXd& theta,
                                         const SolveOptions& opt = SolveOptions()) {
  validate_producers(net, producers);
  if (theta.size() != static_cast<int>(producers.size()))
    throw InputError("shape error");
  for (int j = 0; j < theta.size(); ++j) {
    if (!(theta[j] >= 0.0)) throw InputError("shape error");
    if (theta[j] > 0.0 && producers[j].capacity <= 0.0)
      throw InputError("capacity exceeded (log barrier)");
  }
  auto at = producers_by_node(net, producers);
  const int n = net.node_count;

  std::vector<double> cap_sum(n, 0.0), bid_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j : at[i]) {
      cap_sum[i] += producers[j].capacity;
      bid_sum[i] += theta[j];
    }

  // Upper boxes stay strictly inside aggregate capacity where the barrier
  // diverges; lower boxes come from the balance-implied bound.
  std::vector<double> hi(n);
  double hi_total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (at[i].empty()) {
      hi[i] = 0.0;
    } else if (bid_sum[i] > 0.0) {
      hi[i] = cap_sum[i] * (1.0 - 1e-12);
    } else {
      hi[i] = cap_sum[i];
    }
    hi_total += hi[i];
  }
  const double total = net.demand.sum();
  std::vector<NodeObjective> obj(n);
  std::vector<bool> flat(n, false);
  for (int i = 0; i < n; ++i) {
    double lo = at[i].empty() ? 0.0 : std::min(total - (hi_total - hi[i]), 0.0);
    if (at[i].empty()) {
      obj[i] = NodeObjective{0.0, 0.0, nullptr, nullptr};
      continue;
    }
    if (bid_sum[i] > 0.0) {
      double ts = bid_sum[i], cs = cap_sum[i];
      auto d = [ts, cs](double z) { return ts / (cs - z); };
      obj[i] = NodeObjective{lo, hi[i], d, d};
    } else {
      flat[i] = true;
      auto zero = [](double) { return 0.0; };
      obj[i] = NodeObjective{lo, hi[i], zero, zero};
    }
  }

  SolveResult sol;
  try {
    sol = solve_polytope(obj, net, opt);
  } catch (const Refusal&) {
    throw Refusal("demand cannot be met");
  }

  bool any_flat = false;
  for (int i = 0; i < n; ++i) any_flat = any_flat || flat[i];
  if (any_flat) {
    std::vector<NodeObjective> tie(n);
    for (int i = 0; i < n; ++i) {
      if (flat[i]) {
        auto d = [](double z) { return 2.0 * z; };
        tie[i] = NodeObjective{obj[i].lo, obj[i].hi, d, d};
      } else {
        double v = sol.minimizer[i];
        tie[i] = NodeObjective{v, v, nullptr, nullptr};
      }
    }
    try {
      SolveResult norm = solve_polytope(tie, net, opt);
      for (int i = 0; i < n; ++i)
        if (flat[i]) sol.minimizer[i] = norm.minimizer[i];
    } catch (const Refusal&) {
      // Keep the first solve's point if the tie-break restriction is
      // numerically infeasible.
    }
  }

  DispatchOutcome out;
  out.q = sol.minimizer;
  out.lambda = sol.lambda;
  out.mu = sol.mu;
  out.status = sol.status;
  out.x.resize(static_cast<int>(producers.size()));
  out.p.resize(n);
  out.objective_value = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd caps(static_cast<int>(at[i].size()));
    Eigen::VectorXd th(static_cast<int>(at[i].size()));
    for (std::size_t k = 0; k < at[i].size(); ++k) {
      caps[static_cast<int>(k)] = producers[at[i][k]].capacity;
      th[static_cast<int>(k)] = theta[at[i][k]];
    }
    Eigen::VectorXd xi = local_allocation(caps, th, out.q[i]);
    for (std::size_t k = 0; k < at[i].size(); ++k) {
      out.x[at[i][k]] = xi[static_cast<int>(k)];
      if (xi[static_cast<int>(k)] < -1e-12 * (1.0 + caps[static_cast<int>(k)]))
        out.negative_allocation = true;
    }
    out.p[i] = at[i].empty() ? (sol.lambda -
                                (net.line_capacity.size() > 0
                                     ? net.shift_factor.col(i).dot(sol.mu)
                                     : 0.0))
                             : nodal_price(caps, th, out.q[i]);
    out.objective_value += reported_node_value(caps, th, out.q[i]);
  }
  return out;
}

}  // namespace sfe
