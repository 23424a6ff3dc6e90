#pragma once

// Equilibrium layer: competitive equilibrium (efficient dispatch plus dual
// prices and bid reconstruction), Nash equilibrium via the two-layer convex
// decomposition with modified costs, scalar best-response search, and
// equilibrium verification.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/dispatch.hpp"
#include "sfe/errors.hpp"
#include "sfe/network.hpp"
#include "sfe/solver.hpp"

namespace sfe {

struct EquilibriumOutcome {
  std::string kind;  // "competitive" or "nash"
  DispatchOutcome dispatch;
  Eigen::VectorXd theta;
  Eigen::VectorXd payoffs;
  double iso_payoff = 0.0;
  bool verified = false;
  double max_deviation_gain = 0.0;
  bool iso_optimal = false;
  double price_interval_width = 0.0;
  double allocation_mismatch = 0.0;
  std::string note;
};

inline double producer_payoff(double price, double x, const CostSpec& cost) {
  return price * x - cost.eval(x).value;
}

// Largest payoff a price-taking producer can reach at a fixed price, found
// where the marginal cost crosses the price.
inline double price_taker_optimum(const Producer& pr, double price) {
  ScalarConvex f = true_cost_part(pr);
  double x = detail::argmin_hi(f, price);
  return producer_payoff(price, x, pr.cost);
}

namespace detail {

inline EquilibriumOutcome trivial_outcome(const NetworkModel& net,
                                          std::size_t n_producers,
                                          const std::string& kind) {
  EquilibriumOutcome out;
  out.kind = kind;
  out.dispatch.x = Eigen::VectorXd::Zero(static_cast<int>(n_producers));
  out.dispatch.q = Eigen::VectorXd::Zero(net.node_count);
  out.dispatch.p = Eigen::VectorXd::Zero(net.node_count);
  out.dispatch.mu = Eigen::VectorXd::Zero(net.line_capacity.size());
  out.theta = Eigen::VectorXd::Zero(static_cast<int>(n_producers));
  out.payoffs = Eigen::VectorXd::Zero(static_cast<int>(n_producers));
  out.note = "zero-demand";
  return out;
}

}  // namespace detail

// Slater-style check for the efficient dispatch feasible set: maximal
// uniform slack achievable simultaneously in the flow limits and the nodal
// capacity boxes.
inline bool dispatch_strictly_feasible(const NetworkModel& net,
                                       const std::vector<Producer>& producers) {
  const int n = net.node_count;
  const int rows = static_cast<int>(net.line_capacity.size());
  auto at = producers_by_node(net, producers);
  std::vector<double> cap_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j : at[i]) cap_sum[i] += producers[j].capacity;

  int box_rows = 0;
  for (int i = 0; i < n; ++i)
    if (!at[i].empty()) box_rows += 2;
  LinearProgram lp;
  lp.A = Eigen::MatrixXd::Zero(1 + rows + box_rows, n + 1);
  lp.b = Eigen::VectorXd::Zero(1 + rows + box_rows);
  lp.num_eq = 1;
  lp.A.block(0, 0, 1, n).setOnes();
  lp.b[0] = net.demand.sum();
  if (rows > 0) {
    lp.A.block(1, 0, rows, n) = net.shift_factor;
    lp.A.block(1, n, rows, 1).setOnes();
    lp.b.segment(1, rows) =
        net.line_capacity + net.shift_factor * net.demand;
  }
  int r = 1 + rows;
  for (int i = 0; i < n; ++i) {
    if (at[i].empty()) continue;
    lp.A(r, i) = 1.0;
    lp.A(r, n) = 1.0;
    lp.b[r] = cap_sum[i];
    ++r;
    lp.A(r, i) = -1.0;
    lp.A(r, n) = 1.0;
    lp.b[r] = 0.0;
    ++r;
  }
  lp.cost = Eigen::VectorXd::Zero(n + 1);
  lp.cost[n] = -1.0;
  lp.lo = Eigen::VectorXd::Zero(n + 1);
  lp.hi = Eigen::VectorXd::Constant(n + 1, kInf);
  for (int i = 0; i < n; ++i) {
    lp.hi[i] = at[i].empty() ? 0.0 : cap_sum[i];
    lp.lo[i] = 0.0;
  }
  double scale = std::max(1.0, net.demand.sum());
  lp.hi[n] = scale;
  LpResult res = solve_lp(lp);
  return res.status == LpStatus::optimal && res.x[n] > 1e-9 * scale;
}

// Competitive equilibrium: efficient dispatch plus its dual prices; bids are
// reconstructed so each supply function passes through (price, allocation).
inline EquilibriumOutcome competitive_equilibrium(
    const NetworkModel& net, const std::vector<Producer>& producers,
    const SolveOptions& opt = SolveOptions(), double eps = 1e-6) {
  validate_producers(net, producers);
  if (net.demand.sum() <= 0.0) {
    EquilibriumOutcome out =
        detail::trivial_outcome(net, producers.size(), "competitive");
    out.verified = false;  // price positivity unattainable at zero demand
    return out;
  }

  EquilibriumOutcome out;
  out.kind = "competitive";
  out.dispatch = efficient_dispatch(net, producers, opt);
  const int nprod = static_cast<int>(producers.size());
  out.theta.resize(nprod);
  out.payoffs.resize(nprod);
  double max_gain = 0.0;
  double min_price = kInf;
  for (int j = 0; j < nprod; ++j) {
    const Producer& pr = producers[j];
    double p = out.dispatch.p[pr.node];
    double xj = out.dispatch.x[j];
    out.theta[j] = std::max(0.0, p * (pr.capacity - xj));
    out.payoffs[j] = producer_payoff(p, xj, pr.cost);
    max_gain = std::max(max_gain, price_taker_optimum(pr, p) - out.payoffs[j]);
    min_price = std::min(min_price, p);
  }
  out.iso_payoff = out.dispatch.p.dot(net.demand - out.dispatch.q);
  out.max_deviation_gain = max_gain;
  out.iso_optimal = true;
  out.verified = max_gain <= eps && min_price > 0.0;
  if (!dispatch_strictly_feasible(net, producers))
    out.note = "non-strict feasibility: duals may be non-unique";
  return out;
}

struct GOracleResult {
  Eigen::VectorXd x;  // node-local allocation
  double g_lo = 0.0;  // left derivative of the modified nodal cost
  double g_hi = 0.0;  // right derivative
};

// Modified-cost scalar problems for one node at nodal target z; each
// producer's residual capacity is the rivals' total minus the target.
inline std::vector<ScalarConvex> modified_parts(
    const std::vector<Producer>& node_producers, double z) {
  double cap_sum = 0.0;
  for (const Producer& pr : node_producers) cap_sum += pr.capacity;
  std::vector<ScalarConvex> parts;
  parts.reserve(node_producers.size());
  for (const Producer& pr : node_producers) {
    double residual = cap_sum - pr.capacity - z;
    const CostSpec* cs = &pr.cost;
    parts.push_back(ScalarConvex{
        pr.capacity,
        [cs, residual](double x) { return modified_cost(*cs, x, residual).dleft; },
        [cs, residual](double x) {
          return modified_cost(*cs, x, residual).dright;
        }});
  }
  return parts;
}

// Derivative oracle of the modified nodal cost: allocation of z under
// modified costs plus the multiplier interval.  Defined for targets strictly
// below the rivals' aggregate capacity of every producer.
inline GOracleResult g_oracle(const std::vector<Producer>& node_producers,
                              double z) {
  if (!(z >= 0.0)) throw InputError("shape error");
  double cap_sum = 0.0, max_cap = 0.0;
  for (const Producer& pr : node_producers) {
    cap_sum += pr.capacity;
    max_cap = std::max(max_cap, pr.capacity);
  }
  if (node_producers.empty() || z >= cap_sum - max_cap)
    throw Refusal("beyond no-pivotal range");
  NodeAllocation alloc = dual_bisection(modified_parts(node_producers, z), z);
  return GOracleResult{alloc.x, alloc.lambda_lo, alloc.lambda_hi};
}

// Payoff of producer local_idx at a node with the given caps and bids when
// its own bid is replaced by theta_j and the nodal supply target is fixed.
inline double bid_payoff(const CostSpec& cost, const Eigen::VectorXd& caps,
                         const Eigen::VectorXd& theta, int local_idx,
                         double q_i, double theta_j) {
  Eigen::VectorXd th = theta;
  th[local_idx] = theta_j;
  double ts = th.sum();
  double cs = caps.sum();
  if (ts <= 0.0) {
    double x = cs > 0.0 ? caps[local_idx] / cs * q_i : 0.0;
    return -cost.eval(x).value;
  }
  if (q_i >= cs) throw Refusal("price undefined at full capacity");
  double p = ts / (cs - q_i);
  double x = caps[local_idx] - (theta_j / ts) * (cs - q_i);
  return p * x - cost.eval(x).value;
}

struct BestResponse {
  double theta_star = 0.0;
  double payoff_star = 0.0;
};

// Scalar maximization of producer j's payoff over its own bid, holding the
// nodal supply and rival bids fixed: coarse grid then golden-section.
inline BestResponse best_response(const NetworkModel& net,
                                  const std::vector<Producer>& producers,
                                  const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& theta, int j) {
  validate_producers(net, producers);
  if (theta.size() != static_cast<int>(producers.size()) ||
      q.size() != net.node_count || j < 0 ||
      j >= static_cast<int>(producers.size()))
    throw InputError("shape error");
  const Producer& pj = producers[j];
  auto at = producers_by_node(net, producers);
  const auto& local = at[pj.node];
  Eigen::VectorXd caps(static_cast<int>(local.size()));
  Eigen::VectorXd th(static_cast<int>(local.size()));
  int local_idx = -1;
  for (std::size_t k = 0; k < local.size(); ++k) {
    caps[static_cast<int>(k)] = producers[local[k]].capacity;
    th[static_cast<int>(k)] = theta[local[k]];
    if (local[k] == j) local_idx = static_cast<int>(k);
  }
  double p_max = 0.0;
  for (const Producer& pr : producers)
    p_max = std::max(p_max, pr.cost.eval(pr.capacity).dright);
  double theta_cap = 1e3 * p_max * pj.capacity;
  auto payoff = [&](double t) {
    return bid_payoff(pj.cost, caps, th, local_idx, q[pj.node], t);
  };
  if (theta_cap <= 0.0) return BestResponse{0.0, payoff(0.0)};

  const int grid = 64;
  int best_k = 0;
  double best_v = -kInf;
  for (int k = 0; k <= grid; ++k) {
    double t = theta_cap * k / grid;
    double v = payoff(t);
    if (v > best_v) {
      best_v = v;
      best_k = k;
    }
  }
  double a = theta_cap * std::max(0, best_k - 1) / grid;
  double b = theta_cap * std::min(grid, best_k + 1) / grid;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = payoff(x1), f2 = payoff(x2);
  while (b - a > 1e-10 * (1.0 + theta_cap)) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = payoff(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = payoff(x1);
    }
  }
  double t_star = 0.5 * (a + b);
  double v_star = payoff(t_star);
  if (best_v > v_star) {
    t_star = theta_cap * best_k / grid;
    v_star = best_v;
  }
  return BestResponse{t_star, v_star};
}

struct NashVerification {
  bool producers_ok = false;
  double max_deviation_gain = 0.0;
  bool iso_optimal = false;
};

// Checks both defining inequalities of a pure-strategy equilibrium: no
// producer can gain more than eps by a unilateral bid change, and the nodal
// supply solves the reported-cost dispatch at the given bids.
inline NashVerification verify_nash(const NetworkModel& net,
                                    const std::vector<Producer>& producers,
                                    const Eigen::VectorXd& q,
                                    const Eigen::VectorXd& theta, double eps,
                                    const SolveOptions& opt = SolveOptions()) {
  NashVerification out;
  if (!injection_feasible(net, q - net.demand, 1e-6)) return out;
  auto at = producers_by_node(net, producers);

  double max_gain = -kInf;
  for (std::size_t j = 0; j < producers.size(); ++j) {
    const Producer& pr = producers[j];
    const auto& local = at[pr.node];
    Eigen::VectorXd caps(static_cast<int>(local.size()));
    Eigen::VectorXd th(static_cast<int>(local.size()));
    int local_idx = -1;
    for (std::size_t k = 0; k < local.size(); ++k) {
      caps[static_cast<int>(k)] = producers[local[k]].capacity;
      th[static_cast<int>(k)] = theta[local[k]];
      if (local[k] == static_cast<int>(j)) local_idx = static_cast<int>(k);
    }
    double current = bid_payoff(pr.cost, caps, th, local_idx, q[pr.node],
                                theta[static_cast<int>(j)]);
    BestResponse br = best_response(net, producers, q, theta,
                                    static_cast<int>(j));
    max_gain = std::max(max_gain, br.payoff_star - current);
  }
  if (producers.empty()) max_gain = 0.0;
  out.max_deviation_gain = max_gain;
  out.producers_ok = max_gain <= eps;

  double value_at_q = 0.0;
  for (int i = 0; i < net.node_count; ++i) {
    const auto& local = at[i];
    Eigen::VectorXd caps(static_cast<int>(local.size()));
    Eigen::VectorXd th(static_cast<int>(local.size()));
    for (std::size_t k = 0; k < local.size(); ++k) {
      caps[static_cast<int>(k)] = producers[local[k]].capacity;
      th[static_cast<int>(k)] = theta[local[k]];
    }
    if (local.empty() && std::fabs(q[i]) > 1e-9) return out;
    if (!local.empty()) value_at_q += reported_node_value(caps, th, q[i]);
  }
  DispatchOutcome rd = reported_dispatch(net, producers, theta, opt);
  out.iso_optimal = value_at_q <= rd.objective_value + eps;
  return out;
}

// Nash equilibrium via the nodal decomposition: the supply profile minimizes
// the modified nodal costs over the injection-feasible set (using the
// multiplier-interval oracle as the coordinate derivative), the production
// profile re-allocates each nodal total under modified costs, prices come
// from the polytope duals projected into the nodal stationarity intervals,
// and bids are reconstructed from the supply functions.
inline EquilibriumOutcome nash_equilibrium(const NetworkModel& net,
                                           const std::vector<Producer>& producers,
                                           const SolveOptions& opt = SolveOptions(),
                                           double eps = 1e-6) {
  validate_producers(net, producers);
  const int n = net.node_count;
  const int nprod = static_cast<int>(producers.size());
  if (net.demand.sum() <= 0.0) {
    EquilibriumOutcome out =
        detail::trivial_outcome(net, producers.size(), "nash");
    out.verified = true;
    out.iso_optimal = true;
    return out;
  }
  auto at = producers_by_node(net, producers);

  std::vector<std::vector<Producer>> node_producers(n);
  std::vector<double> cap_sum(n, 0.0), max_cap(n, 0.0), qmax(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j : at[i]) {
      node_producers[i].push_back(producers[j]);
      cap_sum[i] += producers[j].capacity;
      max_cap[i] = std::max(max_cap[i], producers[j].capacity);
    }
    if (at[i].empty()) continue;
    if (at[i].size() < 2)
      throw Refusal("pivotal supplier present: NE computation refused (node " +
                    std::to_string(i) + " has a single producer)");
    qmax[i] = max_nodal_supply(net, i);
    if (!(qmax[i] > 0.0)) throw Refusal("degenerate node");
    for (int j : at[i]) {
      double rsi = (cap_sum[i] - producers[j].capacity) / qmax[i];
      if (!(rsi > 1.0))
        throw Refusal("pivotal supplier present: NE computation refused "
                      "(producer " + std::to_string(j) + ")");
    }
  }

  // Nodal-objective derivative oracles, memoized per target.
  std::vector<NodeObjective> obj(n);
  using Memo = std::map<double, std::pair<double, double>>;
  std::vector<std::shared_ptr<Memo>> memos(n);
  for (int i = 0; i < n; ++i) {
    if (at[i].empty()) {
      obj[i] = NodeObjective{0.0, 0.0, nullptr, nullptr};
      continue;
    }
    double q_cap = cap_sum[i] - max_cap[i];  // strict convexity range end
    double hi = 0.5 * (qmax[i] + q_cap);
    memos[i] = std::make_shared<Memo>();
    auto memo = memos[i];
    const auto* prs = &node_producers[i];
    auto lookup = [memo, prs](double z) -> std::pair<double, double> {
      auto it = memo->find(z);
      if (it != memo->end()) return it->second;
      GOracleResult r = g_oracle(*prs, z);
      auto val = std::make_pair(r.g_lo, r.g_hi);
      (*memo)[z] = val;
      return val;
    };
    obj[i] = NodeObjective{0.0, hi,
                           [lookup](double z) { return lookup(z).first; },
                           [lookup](double z) { return lookup(z).second; }};
  }

  SolveResult sol;
  try {
    sol = solve_polytope(obj, net, opt);
  } catch (const Refusal&) {
    throw Refusal("demand cannot be met");
  }

  EquilibriumOutcome out;
  out.kind = "nash";
  out.dispatch.q = sol.minimizer;
  out.dispatch.lambda = sol.lambda;
  out.dispatch.mu = sol.mu;
  out.dispatch.status = sol.status;
  out.dispatch.x.resize(nprod);
  out.dispatch.p.resize(n);
  out.theta.resize(nprod);
  out.payoffs.resize(nprod);

  for (int i = 0; i < n; ++i) {
    double p_raw = sol.lambda;
    if (net.line_capacity.size() > 0)
      p_raw -= net.shift_factor.col(i).dot(sol.mu);
    if (at[i].empty()) {
      out.dispatch.p[i] = p_raw;
      continue;
    }
    GOracleResult ga = g_oracle(node_producers[i], out.dispatch.q[i]);
    // Sample the stationarity interval with the same snap band the polytope
    // solver uses, so a nodal total resting within solver tolerance of a
    // derivative jump still exposes the full multiplier interval.
    double snap = 1e-9 * (obj[i].hi - obj[i].lo);
    double g_left =
        g_oracle(node_producers[i],
                 std::max(obj[i].lo, out.dispatch.q[i] - snap)).g_lo;
    double g_right =
        g_oracle(node_producers[i],
                 std::min(obj[i].hi, out.dispatch.q[i] + snap)).g_hi;
    out.price_interval_width =
        std::max(out.price_interval_width, g_right - g_left);
    // At zero nodal supply the stationarity interval extends down to zero
    // (modified costs vanish for nonpositive output), so the shadow price
    // passes through unclamped; lifting it would leave the smooth reported
    // objective non-stationary for the dispatcher.
    double p_lo = out.dispatch.q[i] > 1e-9 * (1.0 + qmax[i]) ? g_left : 0.0;
    double p = std::clamp(p_raw, p_lo, g_right);
    out.dispatch.p[i] = p;
    Eigen::VectorXd caps(static_cast<int>(at[i].size()));
    for (std::size_t k = 0; k < at[i].size(); ++k) {
      int j = at[i][k];
      double xj = ga.x[static_cast<int>(k)];
      out.dispatch.x[j] = xj;
      out.theta[j] = std::max(0.0, p * (producers[j].capacity - xj));
      out.payoffs[j] = producer_payoff(p, xj, producers[j].cost);
      caps[static_cast<int>(k)] = producers[j].capacity;
    }
    // Reconstruction diagnostic: the closed-form allocation at (q, theta)
    // must reproduce the modified-cost allocation.
    Eigen::VectorXd th(static_cast<int>(at[i].size()));
    for (std::size_t k = 0; k < at[i].size(); ++k)
      th[static_cast<int>(k)] = out.theta[at[i][k]];
    Eigen::VectorXd recon = local_allocation(caps, th, out.dispatch.q[i]);
    for (std::size_t k = 0; k < at[i].size(); ++k)
      out.allocation_mismatch =
          std::max(out.allocation_mismatch,
                   std::fabs(recon[static_cast<int>(k)] -
                             ga.x[static_cast<int>(k)]));
  }
  out.dispatch.objective_value = 0.0;
  for (int j = 0; j < nprod; ++j)
    out.dispatch.objective_value +=
        producers[j].cost.eval(out.dispatch.x[j]).value;
  out.iso_payoff = out.dispatch.p.dot(net.demand - out.dispatch.q);

  NashVerification ver =
      verify_nash(net, producers, out.dispatch.q, out.theta, eps, opt);
  out.max_deviation_gain = ver.max_deviation_gain;
  out.iso_optimal = ver.iso_optimal;
  out.verified = ver.producers_ok && ver.iso_optimal;
  return out;
}

struct UnboundedPoaInstance {
  NetworkModel net;
  std::vector<Producer> producers;
  Eigen::VectorXd q;      // analytic equilibrium nodal supply
  Eigen::VectorXd theta;  // analytic equilibrium bids
  Eigen::VectorXd x;      // analytic equilibrium production
  double beta = 0.0;      // node-2 marginal cost
  double price = 0.0;     // common equilibrium price
  double poa_lower_bound = 0.0;
};

// Two-node family with one pivotal node whose equilibrium efficiency loss
// grows without bound as t approaches the rivals' aggregate capacity.
inline UnboundedPoaInstance unbounded_poa_instance(int n1, int n2, double k1,
                                                   double k2, double demand,
                                                   double t) {
  const double D = demand;
  if (!(D > 0.0) || n1 < 2 || n2 < 2 || !(k1 > 0.0) || !(k2 > 0.0))
    throw Refusal("outside unbounded-efficiency-loss regime");
  if (!(n1 * k1 >= D) || !(D > (n1 - 1) * k1) || !((n2 - 1) * k2 > D))
    throw Refusal("outside unbounded-efficiency-loss regime");
  double t_lo = (n1 - 1) * k1 /
                (1.0 + (static_cast<double>(n2) / n1) * ((n2 - 1) * k2 / D - 1.0));
  double t_hi = (n1 - 1) * k1;
  if (!(t > t_lo) || !(t < t_hi))
    throw Refusal("outside unbounded-efficiency-loss regime");

  UnboundedPoaInstance out;
  Eigen::VectorXd d(2);
  d << D / 2.0, D / 2.0;
  out.net = build_network({LineSpec{0, 1, D, std::nullopt}}, d, 0);
  double m = 1.0 + (t / n1) / ((n1 - 1) * k1 - t);
  out.beta = m / (1.0 + ((D - t) / n2) / ((n2 - 1) * k2 - (D - t)));
  out.price = m;
  for (int j = 0; j < n1; ++j)
    out.producers.push_back(Producer{0, k1, CostSpec::linear(1.0)});
  for (int j = 0; j < n2; ++j)
    out.producers.push_back(Producer{1, k2, CostSpec::linear(out.beta)});
  out.q.resize(2);
  out.q << t, D - t;
  out.x.resize(n1 + n2);
  out.theta.resize(n1 + n2);
  for (int j = 0; j < n1; ++j) {
    out.x[j] = t / n1;
    out.theta[j] = m * (k1 - t / n1);
  }
  for (int j = 0; j < n2; ++j) {
    out.x[n1 + j] = (D - t) / n2;
    out.theta[n1 + j] = m * (k2 - (D - t) / n2);
  }
  out.poa_lower_bound = (t + out.beta * (D - t)) / D;
  return out;
}

}  // namespace sfe
