#pragma once

// Dense two-phase primal simplex for small bounded-variable linear programs.
// Row duals follow the convention cost = A'y + reduced, so a binding <= row
// in a minimization has y_r <= 0.  Problems here have at most a few dozen
// rows, so the basis is refactorized from scratch every iteration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sfe/cost.hpp"
#include "sfe/errors.hpp"

namespace sfe {

enum class LpStatus { optimal, infeasible, unbounded, iter_limit };

// min cost'x  s.t.  A x {= , <=} b,  lo <= x <= hi.
// Rows [0, num_eq) are equalities, the remaining rows are <=.
// Lower bounds must be finite; upper bounds may be +inf.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  int num_eq = 0;
  Eigen::VectorXd cost;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct LpResult {
  LpStatus status = LpStatus::iter_limit;
  Eigen::VectorXd x;        // structural solution
  Eigen::VectorXd y;        // one dual per input row
  Eigen::VectorXd reduced;  // reduced costs of structural columns
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

constexpr int kAtLo = 0;
constexpr int kAtHi = 1;
constexpr int kBasic = 2;

struct SimplexWork {
  int rows = 0;
  int n_struct = 0;
  int n_slack = 0;  // one per <= row
  int n_total = 0;  // struct + slack + artificial
  Eigen::MatrixXd cols;
  Eigen::VectorXd rhs;
  std::vector<double> lo, hi, cost;
  std::vector<int> basis;   // basic column per row
  std::vector<int> state;   // per column
  std::vector<double> xval;
  std::vector<int> row_id;  // original row index per working row
};

inline double basic_infeasibility(const SimplexWork& w) {
  double v = 0.0;
  for (int r = 0; r < w.rows; ++r) {
    int c = w.basis[r];
    v = std::max(v, w.lo[c] - w.xval[c]);
    if (std::isfinite(w.hi[c])) v = std::max(v, w.xval[c] - w.hi[c]);
  }
  return v;
}

// One simplex phase on the working tableau.  Minimizes the currently set
// costs starting from the current basic solution.  Columns >= limit_col are
// ineligible to enter (used to freeze artificials in phase 2).
inline LpStatus run_phase(SimplexWork& w, int limit_col, int max_iter,
                          int& iter_count) {
  const double dtol = 1e-9;
  const double ptol = 1e-10;
  int stall = 0;
  bool bland = false;
  double last_obj = kInf;
  Eigen::MatrixXd B(w.rows, w.rows);
  Eigen::VectorXd cb(w.rows);
  while (true) {
    if (iter_count >= max_iter) return LpStatus::iter_limit;
    ++iter_count;
    for (int r = 0; r < w.rows; ++r) {
      B.col(r) = w.cols.col(w.basis[r]);
      cb[r] = w.cost[w.basis[r]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Eigen::VectorXd y = lu.transpose().solve(cb);

    int enter = -1;
    double best = dtol;
    for (int j = 0; j < limit_col; ++j) {
      if (w.state[j] == kBasic) continue;
      if (w.lo[j] == w.hi[j]) continue;  // fixed column can never improve
      double dj = w.cost[j] - y.dot(w.cols.col(j));
      double viol = (w.state[j] == kAtLo) ? -dj : dj;
      if (viol > dtol) {
        if (bland) {
          enter = j;
          break;
        }
        if (viol > best) {
          best = viol;
          enter = j;
        }
      }
    }
    if (enter < 0) return LpStatus::optimal;

    double sigma = (w.state[enter] == kAtLo) ? 1.0 : -1.0;
    Eigen::VectorXd wdir = lu.solve(w.cols.col(enter));

    // Basic variable in row r moves by -sigma * t * wdir[r].
    double t = std::isfinite(w.hi[enter]) && std::isfinite(w.lo[enter])
                   ? w.hi[enter] - w.lo[enter]
                   : kInf;
    int leave_row = -1;
    for (int r = 0; r < w.rows; ++r) {
      double delta = -sigma * wdir[r];
      int c = w.basis[r];
      double tr = kInf;
      if (delta > ptol) {
        if (std::isfinite(w.hi[c])) tr = (w.hi[c] - w.xval[c]) / delta;
      } else if (delta < -ptol) {
        tr = (w.xval[c] - w.lo[c]) / (-delta);
      }
      if (tr < t - 1e-15 ||
          (tr <= t && leave_row >= 0 && bland &&
           w.basis[r] < w.basis[leave_row])) {
        t = std::max(tr, 0.0);
        leave_row = r;
      }
    }
    if (!std::isfinite(t)) return LpStatus::unbounded;

    for (int r = 0; r < w.rows; ++r)
      w.xval[w.basis[r]] -= sigma * t * wdir[r];
    if (leave_row < 0) {
      // Bound flip: the entering variable runs to its opposite bound.
      w.xval[enter] = (w.state[enter] == kAtLo) ? w.hi[enter] : w.lo[enter];
      w.state[enter] = (w.state[enter] == kAtLo) ? kAtHi : kAtLo;
    } else {
      int out = w.basis[leave_row];
      double target_hi = -sigma * wdir[leave_row] > 0.0;
      w.state[out] = target_hi ? kAtHi : kAtLo;
      w.xval[out] = target_hi ? w.hi[out] : w.lo[out];
      w.xval[enter] = (sigma > 0.0) ? w.lo[enter] + t : w.hi[enter] - t;
      w.state[enter] = kBasic;
      w.basis[leave_row] = enter;
    }

    double obj = 0.0;
    for (int j = 0; j < w.n_total; ++j) obj += w.cost[j] * w.xval[j];
    if (obj < last_obj - 1e-13 * (1.0 + std::fabs(last_obj))) {
      stall = 0;
    } else if (++stall > 64) {
      bland = true;
    }
    last_obj = obj;
  }
}

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, int max_iter = 0) {
  const int rows = static_cast<int>(lp.A.rows());
  const int n = static_cast<int>(lp.A.cols());
  if (lp.b.size() != rows || lp.cost.size() != n || lp.lo.size() != n ||
      lp.hi.size() != n || lp.num_eq < 0 || lp.num_eq > rows)
    throw InputError("shape error");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(lp.lo[j]) || lp.hi[j] < lp.lo[j])
      throw InputError("shape error");
  }

  LpResult out;
  out.x = Eigen::VectorXd::Zero(n);
  out.y = Eigen::VectorXd::Zero(rows);
  out.reduced = Eigen::VectorXd::Zero(n);

  if (rows == 0) {
    for (int j = 0; j < n; ++j) {
      if (lp.cost[j] >= 0.0) {
        out.x[j] = lp.lo[j];
      } else if (std::isfinite(lp.hi[j])) {
        out.x[j] = lp.hi[j];
      } else {
        out.status = LpStatus::unbounded;
        return out;
      }
    }
    out.reduced = lp.cost;
    out.objective = lp.cost.dot(out.x);
    out.status = LpStatus::optimal;
    return out;
  }

  detail::SimplexWork w;
  w.rows = rows;
  w.n_struct = n;
  w.n_slack = rows - lp.num_eq;
  w.n_total = n + w.n_slack + rows;
  w.cols = Eigen::MatrixXd::Zero(rows, w.n_total);
  w.cols.leftCols(n) = lp.A;
  w.rhs = lp.b;
  w.lo.assign(w.n_total, 0.0);
  w.hi.assign(w.n_total, kInf);
  w.cost.assign(w.n_total, 0.0);
  w.state.assign(w.n_total, detail::kAtLo);
  w.xval.assign(w.n_total, 0.0);
  w.basis.assign(rows, -1);
  w.row_id.resize(rows);
  for (int r = 0; r < rows; ++r) w.row_id[r] = r;
  for (int j = 0; j < n; ++j) {
    w.lo[j] = lp.lo[j];
    w.hi[j] = lp.hi[j];
    w.xval[j] = lp.lo[j];
  }
  for (int r = lp.num_eq; r < rows; ++r)
    w.cols(r, n + r - lp.num_eq) = 1.0;

  // Start every structural column at its lower bound; cover each row with
  // its slack when the residual sign allows, otherwise with an artificial.
  Eigen::VectorXd resid = lp.b - lp.A * lp.lo;
  bool need_phase1 = false;
  for (int r = 0; r < rows; ++r) {
    int art = n + w.n_slack + r;
    if (r >= lp.num_eq && resid[r] >= 0.0) {
      int sl = n + r - lp.num_eq;
      w.basis[r] = sl;
      w.state[sl] = detail::kBasic;
      w.xval[sl] = resid[r];
      w.lo[art] = w.hi[art] = 0.0;
    } else {
      w.cols(r, art) = (resid[r] < 0.0) ? -1.0 : 1.0;
      w.basis[r] = art;
      w.state[art] = detail::kBasic;
      w.xval[art] = std::fabs(resid[r]);
      if (w.xval[art] > 0.0) need_phase1 = true;
    }
  }

  if (max_iter <= 0) max_iter = 500 + 50 * (rows + w.n_total);
  int iters = 0;
  const double ftol = 1e-9 * (1.0 + lp.b.cwiseAbs().maxCoeff());

  if (need_phase1) {
    for (int r = 0; r < rows; ++r) w.cost[n + w.n_slack + r] = 1.0;
    LpStatus st = detail::run_phase(w, n + w.n_slack, max_iter, iters);
    if (st == LpStatus::iter_limit) {
      out.status = st;
      out.iterations = iters;
      return out;
    }
    double art_sum = 0.0;
    for (int r = 0; r < rows; ++r) art_sum += w.xval[n + w.n_slack + r];
    if (art_sum > ftol) {
      out.status = LpStatus::infeasible;
      out.iterations = iters;
      return out;
    }
    std::fill(w.cost.begin(), w.cost.end(), 0.0);
  }

  // Pivot residual artificials out of the basis; a row admitting no pivot
  // is linearly dependent and is dropped (its dual is zero).
  for (int r = 0; r < w.rows; ++r) {
    if (w.basis[r] < n + w.n_slack) continue;
    Eigen::MatrixXd B(w.rows, w.rows);
    for (int k = 0; k < w.rows; ++k) B.col(k) = w.cols.col(w.basis[k]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    int found = -1;
    for (int j = 0; j < n + w.n_slack && found < 0; ++j) {
      if (w.state[j] == detail::kBasic) continue;
      Eigen::VectorXd wj = lu.solve(w.cols.col(j));
      if (std::fabs(wj[r]) > 1e-7) found = j;
    }
    if (found >= 0) {
      int art = w.basis[r];
      w.state[art] = detail::kAtLo;
      w.lo[art] = w.hi[art] = 0.0;
      w.xval[art] = 0.0;
      w.basis[r] = found;
      w.state[found] = detail::kBasic;
      // Entering at its current bound value keeps the solution unchanged
      // because the artificial being replaced already sits at zero.
    } else {
      for (int k = r; k + 1 < w.rows; ++k) {
        w.basis[k] = w.basis[k + 1];
        w.row_id[k] = w.row_id[k + 1];
        w.cols.row(k) = w.cols.row(k + 1);
        w.rhs[k] = w.rhs[k + 1];
      }
      --w.rows;
      w.cols.conservativeResize(w.rows, Eigen::NoChange);
      w.rhs.conservativeResize(w.rows);
      w.basis.resize(w.rows);
      w.row_id.resize(w.rows);
      --r;
    }
  }
  for (int r = 0; r < rows; ++r) {
    int art = n + w.n_slack + r;
    w.lo[art] = w.hi[art] = 0.0;
    if (w.state[art] != detail::kBasic) w.xval[art] = 0.0;
  }

  for (int j = 0; j < n; ++j) w.cost[j] = lp.cost[j];
  LpStatus st = detail::run_phase(w, n + w.n_slack, max_iter, iters);
  out.iterations = iters;
  if (st != LpStatus::optimal) {
    out.status = st;
    return out;
  }
  if (detail::basic_infeasibility(w) > 1e-6) {
    out.status = LpStatus::iter_limit;  // numerically corrupted basis
    return out;
  }

  for (int j = 0; j < n; ++j) out.x[j] = w.xval[j];
  Eigen::MatrixXd B(w.rows, w.rows);
  Eigen::VectorXd cb(w.rows);
  for (int r = 0; r < w.rows; ++r) {
    B.col(r) = w.cols.col(w.basis[r]);
    cb[r] = w.cost[w.basis[r]];
  }
  Eigen::VectorXd yw = Eigen::PartialPivLU<Eigen::MatrixXd>(B)
                           .transpose()
                           .solve(cb);
  for (int r = 0; r < w.rows; ++r) out.y[w.row_id[r]] = yw[r];
  // Rows may have been compacted, so accumulate y'A from the original rows.
  for (int j = 0; j < n; ++j) {
    double dot = 0.0;
    for (int r = 0; r < w.rows; ++r) dot += yw[r] * lp.A(w.row_id[r], j);
    out.reduced[j] = lp.cost[j] - dot;
  }
  out.objective = lp.cost.dot(out.x);
  out.status = LpStatus::optimal;
  return out;
}

}  // namespace sfe
