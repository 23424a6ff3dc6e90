#pragma once

// DC transmission network: shift-factor matrix, line limits, demand, and the
// balanced-injection polytope  P = { y : 1'y = 0, H y <= c }.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "sfe/errors.hpp"

namespace sfe {

struct LineSpec {
  int from = 0;
  int to = 0;
  double capacity = 0.0;
  std::optional<double> reactance;  // unit reactance when absent
};

// Rows of shift_factor come in two blocks [F; -F], one per flow direction,
// so forward and backward capacities may differ.
struct NetworkModel {
  int node_count = 0;
  int line_count = 0;
  Eigen::MatrixXd shift_factor;   // 2m x n
  Eigen::VectorXd line_capacity;  // 2m, nonnegative
  Eigen::VectorXd demand;         // n, nonnegative
};

inline NetworkModel make_network(const Eigen::MatrixXd& H,
                                 const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& demand) {
  NetworkModel net;
  net.node_count = static_cast<int>(H.cols());
  if (net.node_count < 1 || H.rows() % 2 != 0 || c.size() != H.rows() ||
      demand.size() != net.node_count)
    throw InputError("shape error");
  net.line_count = static_cast<int>(H.rows()) / 2;
  for (int r = 0; r < c.size(); ++r)
    if (!(c[r] >= 0.0)) throw InputError("shape error");
  for (int i = 0; i < demand.size(); ++i)
    if (!(demand[i] >= 0.0)) throw InputError("shape error");
  net.shift_factor = H;
  net.line_capacity = c;
  net.demand = demand;
  return net;
}

// Power-transfer-distribution-factor construction with a chosen slack node.
// The slack column of the flow matrix is identically zero; flows of balanced
// injections are independent of the slack choice.
inline NetworkModel build_network(const std::vector<LineSpec>& lines,
                                  const Eigen::VectorXd& demand,
                                  int slack_node) {
  const int n = static_cast<int>(demand.size());
  const int m = static_cast<int>(lines.size());
  if (n < 1) throw InputError("shape error");
  if (slack_node < 0 || slack_node >= n) throw InputError("shape error");

  bool any_reactance = false, all_reactance = true;
  for (const LineSpec& ln : lines) {
    if (ln.from < 0 || ln.from >= n || ln.to < 0 || ln.to >= n ||
        ln.from == ln.to || !(ln.capacity >= 0.0))
      throw InputError("shape error");
    if (ln.reactance.has_value()) {
      any_reactance = true;
      if (!(*ln.reactance > 0.0) || !std::isfinite(*ln.reactance))
        throw InputError("invalid reactance");
    } else {
      all_reactance = false;
    }
  }
  if (any_reactance && !all_reactance) throw InputError("invalid reactance");

  // Connectivity over the undirected line graph (capacity-0 lines count).
  std::vector<int> comp(n, -1);
  std::vector<int> stack = {0};
  comp[0] = 0;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (const LineSpec& ln : lines) {
      int v = -1;
      if (ln.from == u) v = ln.to;
      if (ln.to == u) v = ln.from;
      if (v >= 0 && comp[v] < 0) {
        comp[v] = 0;
        stack.push_back(v);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (comp[i] < 0) throw InputError("disconnected network");

  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, n);
  if (m > 0 && n > 1) {
    Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd weight(m);
    for (int l = 0; l < m; ++l) {
      incidence(l, lines[l].from) = 1.0;
      incidence(l, lines[l].to) = -1.0;
      weight[l] = 1.0 / lines[l].reactance.value_or(1.0);
    }
    Eigen::MatrixXd lap =
        incidence.transpose() * weight.asDiagonal() * incidence;
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (i != slack_node) keep.push_back(i);
    Eigen::MatrixXd lap_red(n - 1, n - 1);
    for (int a = 0; a < n - 1; ++a)
      for (int b = 0; b < n - 1; ++b) lap_red(a, b) = lap(keep[a], keep[b]);
    Eigen::MatrixXd inc_red(m, n - 1);
    for (int a = 0; a < n - 1; ++a) inc_red.col(a) = incidence.col(keep[a]);
    Eigen::MatrixXd S_red =
        weight.asDiagonal() * inc_red * lap_red.inverse();
    for (int a = 0; a < n - 1; ++a) F.col(keep[a]) = S_red.col(a);
  }

  Eigen::MatrixXd H(2 * m, n);
  Eigen::VectorXd c(2 * m);
  H.topRows(m) = F;
  H.bottomRows(m) = -F;
  for (int l = 0; l < m; ++l) c[l] = c[m + l] = lines[l].capacity;
  return make_network(H, c, demand);
}

// Membership of y in P up to an absolute tolerance.
inline bool injection_feasible(const NetworkModel& net,
                               const Eigen::VectorXd& y, double tol = 1e-8) {
  if (y.size() != net.node_count) throw InputError("shape error");
  if (std::fabs(y.sum()) > tol) return false;
  if (net.line_capacity.size() == 0) return true;
  Eigen::VectorXd slack = net.shift_factor * y - net.line_capacity;
  return slack.maxCoeff() <= tol;
}

}  // namespace sfe
