#pragma once

// Market-power indices: market share and residual supply index against the
// maximal nodal supply, Lerner markup, worst-case efficiency-loss bound, and
// the price-envelope screen.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/equilibrium.hpp"
#include "sfe/errors.hpp"
#include "sfe/network.hpp"
#include "sfe/solver.hpp"

namespace sfe {

// Maximal nodal supply for every node that hosts producers (zero elsewhere).
inline std::vector<double> nodal_supply_limits(
    const NetworkModel& net, const std::vector<Producer>& producers) {
  validate_producers(net, producers);
  auto at = producers_by_node(net, producers);
  std::vector<double> qmax(net.node_count, 0.0);
  for (int i = 0; i < net.node_count; ++i)
    if (!at[i].empty()) qmax[i] = max_nodal_supply(net, i);
  return qmax;
}

inline double market_share(const NetworkModel& net,
                           const std::vector<Producer>& producers, int j,
                           const std::vector<double>& qmax) {
  if (j < 0 || j >= static_cast<int>(producers.size()))
    throw InputError("shape error");
  double q = qmax[producers[j].node];
  if (!(q > 0.0)) throw Refusal("degenerate node");
  return std::min(producers[j].capacity, q) / q;
}

inline double market_share(const NetworkModel& net,
                           const std::vector<Producer>& producers, int j) {
  return market_share(net, producers, j, nodal_supply_limits(net, producers));
}

inline double rsi(const NetworkModel& net,
                  const std::vector<Producer>& producers, int j,
                  const std::vector<double>& qmax) {
  if (j < 0 || j >= static_cast<int>(producers.size()))
    throw InputError("shape error");
  double q = qmax[producers[j].node];
  if (!(q > 0.0)) throw Refusal("degenerate node");
  double rivals = 0.0;
  for (const Producer& pr : producers)
    if (pr.node == producers[j].node) rivals += pr.capacity;
  rivals -= producers[j].capacity;
  return rivals / q;
}

inline double rsi(const NetworkModel& net,
                  const std::vector<Producer>& producers, int j) {
  return rsi(net, producers, j, nodal_supply_limits(net, producers));
}

// Producers whose rivals cannot cover the nodal supply limit (RSI <= 1).
inline std::vector<int> pivotal_screen(const NetworkModel& net,
                                       const std::vector<Producer>& producers) {
  auto qmax = nodal_supply_limits(net, producers);
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(producers.size()); ++j)
    if (rsi(net, producers, j, qmax) <= 1.0) out.push_back(j);
  return out;
}

// Worst-case ratio of equilibrium cost to efficient cost over demand
// profiles, valid only when no producer is pivotal.
inline double poa_bound(const NetworkModel& net,
                        const std::vector<Producer>& producers) {
  auto qmax = nodal_supply_limits(net, producers);
  double worst = 0.0;
  for (int j = 0; j < static_cast<int>(producers.size()); ++j) {
    double r = rsi(net, producers, j, qmax);
    if (r <= 1.0) throw Refusal("bound undefined (pivotal supplier)");
    worst = std::max(worst, market_share(net, producers, j, qmax) / (r - 1.0));
  }
  return 1.0 + worst;
}

inline double price_of_anarchy(double cost_ne, double cost_eff) {
  if (!(cost_eff >= 0.0) || !(cost_ne >= 0.0)) throw InputError("shape error");
  if (cost_eff == 0.0) {
    if (cost_ne == 0.0) return 1.0;
    throw Refusal("undefined ratio");
  }
  return cost_ne / cost_eff;
}

inline double lerner_index(double price, const CostSpec& cost, double x) {
  if (!(price > 0.0)) throw Refusal("undefined");
  return (price - cost.eval(x).dright) / price;
}

inline double lerner_index(const EquilibriumOutcome& eq,
                           const std::vector<Producer>& producers, int j) {
  if (j < 0 || j >= static_cast<int>(producers.size()) ||
      eq.dispatch.x.size() != static_cast<int>(producers.size()))
    throw InputError("shape error");
  const Producer& pr = producers[j];
  return lerner_index(eq.dispatch.p[pr.node], pr.cost, eq.dispatch.x[j]);
}

inline double lerner_bound(double ms, double rsi_value) {
  if (!(rsi_value > 1.0)) throw Refusal("bound undefined");
  return ms / (ms + rsi_value - 1.0);
}

inline double markup_bound(double ms, double rsi_value) {
  if (!(rsi_value > 1.0)) throw Refusal("bound undefined");
  return 1.0 + ms / (rsi_value - 1.0);
}

inline double lerner_bound(const NetworkModel& net,
                           const std::vector<Producer>& producers, int j) {
  auto qmax = nodal_supply_limits(net, producers);
  return lerner_bound(market_share(net, producers, j, qmax),
                      rsi(net, producers, j, qmax));
}

inline double markup_bound(const NetworkModel& net,
                           const std::vector<Producer>& producers, int j) {
  auto qmax = nodal_supply_limits(net, producers);
  return markup_bound(market_share(net, producers, j, qmax),
                      rsi(net, producers, j, qmax));
}

struct EnvelopeRow {
  double rsi = 0.0;
  double price = 0.0;
  double mc = 8.0;  // marginal-cost default when the column is absent
  double ms = 1.0;  // market-share default when the column is absent
};

struct EnvelopeResult {
  EnvelopeRow row;
  bool has_bound = false;
  double bound = 0.0;
  bool exceeded = false;
  double excess = 0.0;
};

// Screens observed prices against the markup envelope mc*(1 + ms/(rsi-1)).
inline std::vector<EnvelopeResult> envelope_check(
    const std::vector<EnvelopeRow>& rows, double tol = 1e-9) {
  std::vector<EnvelopeResult> out;
  out.reserve(rows.size());
  for (const EnvelopeRow& r : rows) {
    if (!std::isfinite(r.rsi) || !std::isfinite(r.price) ||
        !std::isfinite(r.mc) || !std::isfinite(r.ms) || !(r.mc > 0.0) ||
        !(r.ms > 0.0) || !(r.price >= 0.0))
      throw InputError("shape error");
    EnvelopeResult res;
    res.row = r;
    if (r.rsi > 1.0) {
      res.has_bound = true;
      res.bound = r.mc * markup_bound(r.ms, r.rsi);
      res.exceeded = r.price > res.bound + tol;
      res.excess = std::max(0.0, r.price - res.bound);
    }
    out.push_back(res);
  }
  return out;
}

struct IndexRow {
  int producer = 0;
  int node = 0;
  double capacity = 0.0;
  double market_share = 0.0;
  double rsi = 0.0;
  bool has_lerner = false;
  double lerner = 0.0;
};

struct IndexReport {
  std::vector<double> qmax;
  std::vector<IndexRow> rows;
  bool pivotal_present = false;
  bool has_poa_bound = false;
  double poa_bound = 0.0;
};

inline IndexReport build_index_report(const NetworkModel& net,
                                      const std::vector<Producer>& producers,
                                      const EquilibriumOutcome* eq = nullptr) {
  IndexReport rep;
  rep.qmax = nodal_supply_limits(net, producers);
  double worst = 0.0;
  for (int j = 0; j < static_cast<int>(producers.size()); ++j) {
    IndexRow row;
    row.producer = j;
    row.node = producers[j].node;
    row.capacity = producers[j].capacity;
    row.market_share = market_share(net, producers, j, rep.qmax);
    row.rsi = rsi(net, producers, j, rep.qmax);
    if (row.rsi <= 1.0) rep.pivotal_present = true;
    else worst = std::max(worst, row.market_share / (row.rsi - 1.0));
    if (eq != nullptr && eq->dispatch.p[row.node] > 0.0) {
      row.has_lerner = true;
      row.lerner = lerner_index(*eq, producers, j);
    }
    rep.rows.push_back(row);
  }
  rep.has_poa_bound = !rep.pivotal_present && !producers.empty();
  if (rep.has_poa_bound) rep.poa_bound = 1.0 + worst;
  return rep;
}

}  // namespace sfe
