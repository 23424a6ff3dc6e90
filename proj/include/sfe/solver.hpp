#pragma once

// Shared convex machinery.
//
// dual_bisection: minimize a sum of scalar convex functions subject to a
// total-quantity equality and per-coordinate caps, returning the allocation
// and the full interval of optimal multipliers.
//
// solve_polytope: minimize a separable convex objective over
// { q : 1'(q - d) = 0, H (q - d) <= c, lo <= q <= hi } with multiplier
// extraction.  Each coordinate objective is replaced by an adaptive
// piecewise-linear surrogate whose segment slopes are true derivative
// samples; the surrogate LP is solved exactly and the true KKT system is
// tested at the LP optimum, refining the grid near the incumbent until the
// test passes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/errors.hpp"
#include "sfe/network.hpp"
#include "sfe/simplex.hpp"

namespace sfe {

// One coordinate of a node-local allocation problem: convex on [0, cap],
// identically zero for arguments <= 0.
struct ScalarConvex {
  double cap = 0.0;
  std::function<double(double)> dleft;
  std::function<double(double)> dright;
};

struct NodeAllocation {
  Eigen::VectorXd x;
  double lambda_lo = 0.0;  // max_j dleft at the allocation
  double lambda_hi = 0.0;  // min over non-capped j of dright
  int iterations = 0;
};

namespace detail {

// Smallest x in [0, cap] with dright(x) >= lam (cap if none).
inline double argmin_lo(const ScalarConvex& f, double lam) {
  if (f.dright(0.0) >= lam) return 0.0;
  if (f.dright(f.cap) < lam) return f.cap;
  double a = 0.0, b = f.cap;
  for (int it = 0; it < 100 && b - a > 1e-14 * (1.0 + f.cap); ++it) {
    double m = 0.5 * (a + b);
    (f.dright(m) >= lam ? b : a) = m;
  }
  return b;
}

// Largest x in [0, cap] with dleft(x) <= lam (0 if none).
inline double argmin_hi(const ScalarConvex& f, double lam) {
  if (f.dleft(f.cap) <= lam) return f.cap;
  if (f.dleft(0.0) > lam) return 0.0;
  double a = 0.0, b = f.cap;
  for (int it = 0; it < 100 && b - a > 1e-14 * (1.0 + f.cap); ++it) {
    double m = 0.5 * (a + b);
    (f.dleft(m) <= lam ? a : b) = m;
  }
  return a;
}

// Allocation bracketed by the two ends of the optimal-multiplier interval:
// every coordinate lies between its forced level just below lam_lo and its
// admissible level just above lam_hi, and linear interpolation inside those
// boxes meets the target exactly.
inline NodeAllocation allocate_between(const std::vector<ScalarConvex>& parts,
                                       double z, double lam_lo, double lam_hi,
                                       double guard, int iters) {
  const int k = static_cast<int>(parts.size());
  Eigen::VectorXd a(k), b(k);
  for (int j = 0; j < k; ++j) {
    a[j] = argmin_lo(parts[j], lam_lo - guard);
    b[j] = argmin_hi(parts[j], lam_hi + guard);
    if (b[j] < a[j]) b[j] = a[j];  // inner bisection slack
  }
  double asum = a.sum(), bsum = b.sum();
  NodeAllocation out;
  out.iterations = iters;
  out.x = a;
  double rem = z - asum;
  if (bsum > asum && rem > 0.0) {
    double t = std::min(1.0, rem / (bsum - asum));
    out.x = a + t * (b - a);
    rem = z - out.x.sum();
  }
  // Spread any residual (tiny by construction) over uncapped coordinates.
  for (int pass = 0; pass < 4 && std::fabs(rem) > 0.0; ++pass) {
    int free_count = 0;
    for (int j = 0; j < k; ++j)
      if ((rem > 0.0 && out.x[j] < parts[j].cap) ||
          (rem < 0.0 && out.x[j] > 0.0))
        ++free_count;
    if (free_count == 0) break;
    double share = rem / free_count;
    rem = 0.0;
    for (int j = 0; j < k; ++j) {
      if ((share > 0.0 && out.x[j] >= parts[j].cap) ||
          (share < 0.0 && out.x[j] <= 0.0))
        continue;
      double nx = std::clamp(out.x[j] + share, 0.0, parts[j].cap);
      rem += out.x[j] + share - nx;
      out.x[j] = nx;
    }
    if (std::fabs(rem) < 1e-15 * (1.0 + std::fabs(z))) break;
  }
  // Noise-level allocations distort the one-sided derivatives (a coordinate
  // holding 1e-10 reports its interior marginal cost, not its value at
  // zero); snap them to zero and re-home the mass on the largest coordinate
  // with room, keeping the total exact.
  double cap_scale = 0.0;
  for (int j = 0; j < k; ++j) cap_scale = std::max(cap_scale, parts[j].cap);
  double floor_eps = 1e-9 * (1.0 + cap_scale);
  if (z > 16.0 * k * floor_eps) {
    double moved = 0.0;
    for (int j = 0; j < k; ++j)
      if (out.x[j] > 0.0 && out.x[j] < floor_eps) moved += out.x[j];
    if (moved > 0.0) {
      int rj = -1;
      for (int j = 0; j < k; ++j)
        if (out.x[j] >= floor_eps && out.x[j] + moved <= parts[j].cap &&
            (rj < 0 || out.x[j] > out.x[rj]))
          rj = j;
      if (rj >= 0) {
        for (int j = 0; j < k; ++j)
          if (out.x[j] > 0.0 && out.x[j] < floor_eps) out.x[j] = 0.0;
        out.x[rj] += moved;
      }
    }
  }
  out.lambda_lo = lam_lo;
  out.lambda_hi = lam_hi;
  return out;
}

}  // namespace detail

// Allocation of a target z across the node's producers and the interval of
// optimal multipliers.  The target must lie strictly below the node's
// aggregate capacity.
inline NodeAllocation dual_bisection(const std::vector<ScalarConvex>& parts,
                                     double z, double lambda_tol = 1e-10,
                                     int max_iter = 200) {
  if (parts.empty()) throw Refusal("target exceeds node capacity");
  double cap_sum = 0.0;
  for (const ScalarConvex& f : parts) {
    if (!(f.cap >= 0.0)) throw InputError("shape error");
    cap_sum += f.cap;
  }
  if (z >= cap_sum) throw Refusal("target exceeds node capacity");
  if (z < 0.0) throw Refusal("infeasible");

  double lam_max = 1.0;
  for (const ScalarConvex& f : parts)
    lam_max = std::max(lam_max, f.dleft(f.cap) + 1.0);
  // Convexity makes dleft(cap) an upper bound on dright below cap, so the
  // whole multiplier interval lies inside [0, lam_max].
  const double feas_eps = 1e-12 * (1.0 + std::fabs(z) + cap_sum);
  const double end_tol = 0.01 * lambda_tol;
  auto reach = [&parts](double lam) {  // largest total allocation at lam
    double s = 0.0;
    for (const ScalarConvex& f : parts) s += detail::argmin_hi(f, lam);
    return s;
  };
  auto need = [&parts](double lam) {  // smallest total allocation at lam
    double s = 0.0;
    for (const ScalarConvex& f : parts) s += detail::argmin_lo(f, lam);
    return s;
  };
  int iters = 0;
  // Left derivative of the node value: first multiplier whose allocation
  // range reaches z.
  double lam_lo = 0.0;
  if (reach(0.0) < z - feas_eps) {
    double a = 0.0, b = lam_max;
    while (iters < max_iter && b - a > end_tol * (1.0 + std::fabs(b))) {
      ++iters;
      double mid = 0.5 * (a + b);
      (reach(mid) >= z - feas_eps ? b : a) = mid;
    }
    lam_lo = b;
  }
  // Right derivative: last multiplier whose forced allocation stays at z.
  double lam_hi = lam_max;
  if (need(lam_max) > z + feas_eps) {
    double a = lam_lo, b = lam_max;
    while (iters < max_iter && b - a > end_tol * (1.0 + std::fabs(b))) {
      ++iters;
      double mid = 0.5 * (a + b);
      (need(mid) > z + feas_eps ? b : a) = mid;
    }
    lam_hi = a;
  }
  if (lam_hi < lam_lo) lam_hi = lam_lo;
  double guard =
      2.0 * end_tol * (1.0 + std::max(std::fabs(lam_lo), std::fabs(lam_hi)));
  return detail::allocate_between(parts, z, lam_lo, lam_hi, guard, iters);
}

// Per-coordinate objective over [lo, hi] for the polytope solver, given by
// one-sided derivative oracles.
struct NodeObjective {
  double lo = 0.0;
  double hi = 0.0;
  std::function<double(double)> dleft;
  std::function<double(double)> dright;
};

enum class SolveStatus { optimal, max_iter };

struct SolveResult {
  Eigen::VectorXd minimizer;
  double lambda = 0.0;
  Eigen::VectorXd mu;  // one per shift-factor row, >= 0
  SolveStatus status = SolveStatus::max_iter;
  double primal_residual = 0.0;
  double stationarity_residual = 0.0;
  double complementarity_residual = 0.0;
  int rounds = 0;
};

struct SolveOptions {
  double tol_primal = 1e-8;
  double tol_station = 1e-7;
  double tol_comp = 1e-8;
  int max_rounds = 60;
  int initial_cells = 8;
};

namespace detail {

struct NodeGrid {
  std::vector<double> pts;  // sorted breakpoints from lo to hi
  bool fixed = false;

  void insert(double x, double minw) {
    if (fixed) return;
    auto it = std::lower_bound(pts.begin(), pts.end(), x);
    if (it != pts.end() && *it - x < minw) return;
    if (it != pts.begin() && x - *(it - 1) < minw) return;
    pts.insert(it, x);
  }
};

}  // namespace detail

inline SolveResult solve_polytope(const std::vector<NodeObjective>& obj,
                                  const NetworkModel& net,
                                  const SolveOptions& opt = SolveOptions()) {
  const int n = net.node_count;
  if (static_cast<int>(obj.size()) != n) throw InputError("shape error");
  const int rows = static_cast<int>(net.line_capacity.size());
  const double total = net.demand.sum();

  std::vector<detail::NodeGrid> grid(n);
  for (int i = 0; i < n; ++i) {
    const NodeObjective& f = obj[i];
    if (!(f.hi >= f.lo) || !std::isfinite(f.lo) || !std::isfinite(f.hi))
      throw InputError("shape error");
    if (f.hi - f.lo < 1e-15 * (1.0 + std::fabs(f.hi))) {
      grid[i].fixed = true;
      grid[i].pts = {f.lo};
      continue;
    }
    for (int k = 0; k <= opt.initial_cells; ++k)
      grid[i].pts.push_back(f.lo + (f.hi - f.lo) * k / opt.initial_cells);
  }

  // Slope samples are cached per grid point pair midpoint.
  std::vector<std::map<double, double>> slope_cache(n);
  auto slope = [&](int i, double a, double b) {
    double m = 0.5 * (a + b);
    auto it = slope_cache[i].find(m);
    if (it != slope_cache[i].end()) return it->second;
    double s = 0.5 * (obj[i].dleft(m) + obj[i].dright(m));
    slope_cache[i][m] = s;
    return s;
  };

  SolveResult best;
  best.mu = Eigen::VectorXd::Zero(rows);
  for (int round = 1; round <= opt.max_rounds; ++round) {
    // Assemble the segment LP: q_i = lo_i + sum_k delta_ik.
    int cols = 0;
    for (int i = 0; i < n; ++i)
      if (!grid[i].fixed) cols += static_cast<int>(grid[i].pts.size()) - 1;
    LinearProgram lp;
    lp.A.resize(1 + rows, cols);
    lp.b.resize(1 + rows);
    lp.num_eq = 1;
    lp.cost.resize(cols);
    lp.lo = Eigen::VectorXd::Zero(cols);
    lp.hi.resize(cols);
    Eigen::VectorXd base(n);
    for (int i = 0; i < n; ++i) base[i] = obj[i].lo;
    int col = 0;
    std::vector<std::pair<int, int>> col_node(cols);
    for (int i = 0; i < n; ++i) {
      if (grid[i].fixed) continue;
      double prev_s = -kInf;
      for (std::size_t k = 0; k + 1 < grid[i].pts.size(); ++k) {
        double a = grid[i].pts[k], b = grid[i].pts[k + 1];
        lp.A(0, col) = 1.0;
        if (rows > 0) lp.A.block(1, col, rows, 1) = net.shift_factor.col(i);
        lp.hi[col] = b - a;
        double s = std::max(slope(i, a, b), prev_s);  // keep surrogate convex
        prev_s = s;
        lp.cost[col] = s;
        col_node[col] = {i, static_cast<int>(k)};
        ++col;
      }
    }
    lp.b[0] = total - base.sum();
    if (rows > 0)
      lp.b.tail(rows) =
          net.line_capacity + net.shift_factor * (net.demand - base);

    LpResult sol = solve_lp(lp);
    if (sol.status == LpStatus::infeasible) throw Refusal("infeasible");
    if (sol.status != LpStatus::optimal) throw Refusal("infeasible");

    Eigen::VectorXd q = base;
    for (int cidx = 0; cidx < cols; ++cidx)
      q[col_node[cidx].first] += sol.x[cidx];
    double lambda = sol.y[0];
    Eigen::VectorXd mu = rows > 0 ? Eigen::VectorXd(-sol.y.tail(rows))
                                  : Eigen::VectorXd(0);
    for (int r = 0; r < rows; ++r) mu[r] = std::max(mu[r], 0.0);

    // True KKT residuals at the LP optimum.
    Eigen::VectorXd y = q - net.demand;
    double primal = std::fabs(y.sum());
    Eigen::VectorXd flow_slack(rows);
    if (rows > 0) {
      Eigen::VectorXd flow = net.shift_factor * y;
      flow_slack = net.line_capacity - flow;
      primal = std::max(primal, -flow_slack.minCoeff());
    }
    double comp = 0.0;
    for (int r = 0; r < rows; ++r)
      comp = std::max(comp, std::fabs(mu[r] * std::max(flow_slack[r], 0.0)));

    Eigen::VectorXd price(n);
    for (int i = 0; i < n; ++i) {
      price[i] = lambda;
      if (rows > 0) price[i] -= net.shift_factor.col(i).dot(mu);
    }
    double station = 0.0;
    std::vector<double> cell_at(n, 0.0);
    for (int i = 0; i < n; ++i) {
      if (grid[i].fixed) continue;
      const NodeObjective& f = obj[i];
      double range = f.hi - f.lo;
      auto it = std::upper_bound(grid[i].pts.begin(), grid[i].pts.end(), q[i]);
      std::size_t k = std::min<std::size_t>(
          grid[i].pts.size() - 2,
          it == grid[i].pts.begin() ? 0 : (it - grid[i].pts.begin() - 1));
      cell_at[i] = grid[i].pts[k + 1] - grid[i].pts[k];
      double snap = 1e-9 * range;
      double lo_req = (q[i] - snap > f.lo) ? f.dleft(q[i] - snap) : -kInf;
      double hi_req = (q[i] + snap < f.hi) ? f.dright(q[i] + snap) : kInf;
      double scale = 1.0;
      if (std::isfinite(lo_req)) scale = std::max(scale, std::fabs(lo_req));
      if (std::isfinite(hi_req)) scale = std::max(scale, std::fabs(hi_req));
      double viol = std::max({0.0, lo_req - price[i], price[i] - hi_req});
      station = std::max(station, viol / scale);
    }

    best.minimizer = q;
    best.lambda = lambda;
    best.mu = mu;
    best.primal_residual = primal;
    best.stationarity_residual = station;
    best.complementarity_residual = comp;
    best.rounds = round;
    if (primal <= opt.tol_primal && station <= opt.tol_station &&
        comp <= opt.tol_comp) {
      best.status = SolveStatus::optimal;
      return best;
    }

    // Refine: pin the incumbent and split its cell and both neighbors.
    for (int i = 0; i < n; ++i) {
      if (grid[i].fixed) continue;
      double minw = 1e-13 * (obj[i].hi - obj[i].lo);
      auto& pts = grid[i].pts;
      auto it = std::upper_bound(pts.begin(), pts.end(), q[i]);
      std::size_t k = std::min<std::size_t>(
          pts.size() - 2, it == pts.begin() ? 0 : (it - pts.begin() - 1));
      std::size_t klo = (k == 0) ? 0 : k - 1;
      std::size_t khi = std::min(pts.size() - 2, k + 1);
      std::vector<double> add;
      add.push_back(q[i]);
      for (std::size_t kk = klo; kk <= khi; ++kk)
        add.push_back(0.5 * (pts[kk] + pts[kk + 1]));
      // Tight bracket around the incumbent so the containing cell shrinks
      // by about 8x per round rather than 2x.
      double w = pts[k + 1] - pts[k];
      add.push_back(q[i] - 0.125 * w);
      add.push_back(q[i] + 0.125 * w);
      for (double x : add)
        if (x > obj[i].lo + minw && x < obj[i].hi - minw)
          grid[i].insert(x, minw);
    }
  }
  best.status = SolveStatus::max_iter;
  return best;
}

// Memoizing wrapper for expensive derivative oracles (map keyed on the exact
// query point; grid points persist across refinement rounds).
class MemoScalar {
 public:
  explicit MemoScalar(std::function<double(double)> fn)
      : fn_(std::move(fn)), cache_(std::make_shared<std::map<double, double>>()) {}
  double operator()(double x) const {
    auto it = cache_->find(x);
    if (it != cache_->end()) return it->second;
    double v = fn_(x);
    (*cache_)[x] = v;
    return v;
  }

 private:
  std::function<double(double)> fn_;
  std::shared_ptr<std::map<double, double>> cache_;
};

struct AggregatedResult {
  SolveResult nodal;
  std::vector<Eigen::VectorXd> allocation;  // per node, per local producer
};

// Producer-level separable minimization over the polytope: coordinates are
// grouped by node, the nodal value functions (with multiplier-interval
// derivatives) drive the polytope solve, and the final nodal totals are
// distributed back to producers.  The polytope duals apply unchanged to the
// aggregated problem.
inline AggregatedResult solve_polytope_aggregated(
    const std::vector<std::vector<ScalarConvex>>& node_parts,
    const NetworkModel& net, const SolveOptions& opt = SolveOptions()) {
  const int n = net.node_count;
  if (static_cast<int>(node_parts.size()) != n) throw InputError("shape error");

  std::vector<NodeObjective> obj(n);
  std::vector<double> cap_sum(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (const ScalarConvex& f : node_parts[i]) cap_sum[i] += f.cap;
    if (node_parts[i].empty() || cap_sum[i] <= 0.0) {
      obj[i] = NodeObjective{0.0, 0.0, nullptr, nullptr};
      continue;
    }
    const auto* parts = &node_parts[i];
    double cs = cap_sum[i];
    auto lo_or = MemoScalar([parts, cs](double z) {
      double zq = std::min(std::max(z, 0.0), cs * (1.0 - 1e-15));
      return dual_bisection(*parts, zq).lambda_lo;
    });
    auto hi_or = MemoScalar([parts, cs](double z) {
      double zq = std::min(std::max(z, 0.0), cs * (1.0 - 1e-15));
      return dual_bisection(*parts, zq).lambda_hi;
    });
    obj[i] = NodeObjective{0.0, cap_sum[i], lo_or, hi_or};
  }

  AggregatedResult out;
  out.nodal = solve_polytope(obj, net, opt);
  out.allocation.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& parts = node_parts[i];
    out.allocation[i].resize(static_cast<int>(parts.size()));
    if (parts.empty()) continue;
    double z = out.nodal.minimizer[i];
    if (z >= cap_sum[i] * (1.0 - 1e-12)) {
      for (std::size_t j = 0; j < parts.size(); ++j)
        out.allocation[i][static_cast<int>(j)] = parts[j].cap;
      continue;
    }
    out.allocation[i] = dual_bisection(parts, std::max(z, 0.0)).x;
  }
  return out;
}

// Largest aggregate supply a single node can inject while respecting demand
// balance and line limits: sup { q_i : q >= 0, q - d in P }.
inline double max_nodal_supply(const NetworkModel& net, int i) {
  if (i < 0 || i >= net.node_count) throw InputError("shape error");
  const double total = net.demand.sum();
  std::vector<NodeObjective> obj(net.node_count);
  for (int k = 0; k < net.node_count; ++k) {
    double s = (k == i) ? -1.0 : 0.0;
    obj[k] = NodeObjective{0.0, total, [s](double) { return s; },
                           [s](double) { return s; }};
  }
  try {
    SolveResult r = solve_polytope(obj, net);
    return r.minimizer[i];
  } catch (const Refusal&) {
    throw Refusal("infeasible network");
  }
}

}  // namespace sfe
