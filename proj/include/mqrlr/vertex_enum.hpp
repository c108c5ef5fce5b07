#pragma once

// Exhaustive LP oracle for tests: enumerates basic feasible points as the
// intersections of active constraint sets and filters by feasibility.
// Unboundedness is decided by a recession-direction sub-problem solved with
// the same enumeration inside a [-1,1] box. Only meant for tiny problems.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "mqrlr/common.hpp"
#include "mqrlr/lp.hpp"

namespace mqrlr {

namespace detail {

struct DenseRow {
  std::vector<double> a;
  double rhs;
};

inline std::optional<std::vector<double>> solve_stacked(
    const std::vector<const DenseRow*>& rows, int n) {
  const int m = static_cast<int>(rows.size());
  const int w = n + 1;
  std::vector<double> M(static_cast<std::size_t>(m) * w);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) M[static_cast<std::size_t>(r) * w + c] = rows[r]->a[c];
    M[static_cast<std::size_t>(r) * w + n] = rows[r]->rhs;
  }
  std::vector<int> pivot_col;
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int p = row;
    double best = std::fabs(M[static_cast<std::size_t>(row) * w + col]);
    for (int r = row + 1; r < m; ++r) {
      const double v = std::fabs(M[static_cast<std::size_t>(r) * w + col]);
      if (v > best) {
        best = v;
        p = r;
      }
    }
    if (best < 1e-9) continue;
    if (p != row)
      for (int c = col; c <= n; ++c)
        std::swap(M[static_cast<std::size_t>(row) * w + c],
                  M[static_cast<std::size_t>(p) * w + c]);
    const double d = M[static_cast<std::size_t>(row) * w + col];
    for (int r = 0; r < m; ++r) {
      if (r == row) continue;
      const double f = M[static_cast<std::size_t>(r) * w + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c <= n; ++c)
        M[static_cast<std::size_t>(r) * w + c] -= f * M[static_cast<std::size_t>(row) * w + c];
    }
    pivot_col.push_back(col);
    ++row;
  }
  if (static_cast<int>(pivot_col.size()) < n) return std::nullopt;  // rank deficient
  for (int r = row; r < m; ++r)
    if (std::fabs(M[static_cast<std::size_t>(r) * w + n]) > 1e-7)
      return std::nullopt;  // inconsistent
  std::vector<double> x(n, 0.0);
  for (int r = 0; r < static_cast<int>(pivot_col.size()); ++r) {
    const int c = pivot_col[r];
    x[c] = M[static_cast<std::size_t>(r) * w + n] / M[static_cast<std::size_t>(r) * w + c];
  }
  return x;
}

inline int row_rank(const std::vector<DenseRow>& rows, int n) {
  std::vector<std::vector<double>> work;
  for (const auto& e : rows) work.push_back(e.a);
  int row = 0;
  for (int col = 0; col < n && row < static_cast<int>(work.size()); ++col) {
    int p = -1;
    double best = 1e-9;
    for (int r = row; r < static_cast<int>(work.size()); ++r)
      if (std::fabs(work[r][col]) > best) {
        best = std::fabs(work[r][col]);
        p = r;
      }
    if (p < 0) continue;
    std::swap(work[row], work[p]);
    for (int r = 0; r < static_cast<int>(work.size()); ++r) {
      if (r == row) continue;
      const double f = work[r][col] / work[row][col];
      if (f == 0.0) continue;
      for (int cc = 0; cc < n; ++cc) work[r][cc] -= f * work[row][cc];
    }
    ++row;
  }
  return row;
}

// Best feasible vertex over eqs + les; infeasible when no vertex passes.
inline LpSolution enumerate_vertices(const std::vector<DenseRow>& eqs,
                                     const std::vector<DenseRow>& les,
                                     const std::vector<double>& c, int n) {
  const int eq_rank = row_rank(eqs, n);
  const int k = std::max(0, n - eq_rank);
  const int ni = static_cast<int>(les.size());

  LpSolution sol;
  if (k > ni) {
    sol.status = LpStatus::infeasible;
    return sol;
  }
  double combos = 1.0;
  for (int i = 0; i < k; ++i) combos *= static_cast<double>(ni - i) / (i + 1);
  if (combos > 4e6) throw DataError("brute_force_oracle: size cap exceeded");

  const double ftol = 1e-7;
  bool any_feasible = false;
  double best_obj = kInf;
  std::vector<double> best_x;

  std::vector<int> pick(k);
  for (int i = 0; i < k; ++i) pick[i] = i;
  auto advance = [&]() {
    int i = k - 1;
    while (i >= 0 && pick[i] == ni - k + i) --i;
    if (i < 0) return false;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    return true;
  };

  bool more = true;
  while (more) {
    std::vector<const DenseRow*> active;
    for (const auto& e : eqs) active.push_back(&e);
    for (int i = 0; i < k; ++i) active.push_back(&les[pick[i]]);
    auto cand = solve_stacked(active, n);
    if (cand) {
      bool ok = true;
      for (const auto& e : eqs) {
        double v = -e.rhs;
        for (int i = 0; i < n; ++i) v += e.a[i] * (*cand)[i];
        if (std::fabs(v) > ftol * (1.0 + std::fabs(e.rhs))) {
          ok = false;
          break;
        }
      }
      if (ok)
        for (const auto& l : les) {
          double v = -l.rhs;
          for (int i = 0; i < n; ++i) v += l.a[i] * (*cand)[i];
          if (v > ftol * (1.0 + std::fabs(l.rhs))) {
            ok = false;
            break;
          }
        }
      if (ok) {
        any_feasible = true;
        double obj = 0.0;
        for (int i = 0; i < n; ++i) obj += c[i] * (*cand)[i];
        if (obj < best_obj - 1e-12) {
          best_obj = obj;
          best_x = *cand;
        }
      }
    }
    if (k == 0) break;
    more = advance();
  }

  if (!any_feasible) {
    sol.status = LpStatus::infeasible;
    return sol;
  }
  sol.status = LpStatus::optimal;
  sol.x = std::move(best_x);
  sol.objective_value = best_obj;
  return sol;
}

inline LpSolution brute_force_impl(const StandardLP& lp, double box,
                                   bool check_recession) {
  const int n = lp.num_vars();
  std::vector<DenseRow> eqs, les_real, les_box;
  auto densify = [&](const LinearRow& r) {
    DenseRow d;
    d.a.assign(n, 0.0);
    for (std::size_t k = 0; k < r.cols.size(); ++k) d.a[r.cols[k]] += r.coefs[k];
    d.rhs = r.rhs;
    return d;
  };
  auto unit_row = [&](int i, double sign, double rhs) {
    DenseRow d;
    d.a.assign(n, 0.0);
    d.a[i] = sign;
    d.rhs = rhs;
    return d;
  };
  for (const auto& r : lp.eq_rows) eqs.push_back(densify(r));
  for (const auto& r : lp.le_rows) les_real.push_back(densify(r));
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(lp.upper[i])) les_real.push_back(unit_row(i, 1.0, lp.upper[i]));
    else les_box.push_back(unit_row(i, 1.0, box));
    if (std::isfinite(lp.lower[i])) les_real.push_back(unit_row(i, -1.0, -lp.lower[i]));
    else les_box.push_back(unit_row(i, -1.0, box));
  }

  std::vector<DenseRow> les_all = les_real;
  les_all.insert(les_all.end(), les_box.begin(), les_box.end());
  LpSolution base = enumerate_vertices(eqs, les_all, lp.objective, n);
  if (base.status == LpStatus::infeasible) return base;

  if (check_recession) {
    // improving ray: minimize c.d over the homogenized real constraints with
    // d boxed to [-1,1]; the synthetic box rows are not part of the cone
    StandardLP rec;
    for (int i = 0; i < n; ++i) rec.add_var("d" + std::to_string(i), -1.0, 1.0, lp.objective[i]);
    for (const auto& e : eqs) {
      LinearRow r;
      for (int i = 0; i < n; ++i) r.add(i, e.a[i]);
      r.rhs = 0.0;
      rec.eq_rows.push_back(r);
    }
    for (const auto& l : les_real) {
      LinearRow r;
      for (int i = 0; i < n; ++i) r.add(i, l.a[i]);
      r.rhs = 0.0;
      rec.le_rows.push_back(r);
    }
    LpSolution ray = brute_force_impl(rec, 1.0, false);
    if (ray.status == LpStatus::optimal && ray.objective_value < -1e-9) {
      LpSolution sol;
      sol.status = LpStatus::unbounded;
      return sol;
    }
  }
  return base;
}

}  // namespace detail

// Optimum by enumeration of basic feasible solutions. Test oracle only;
// sizes are capped because runtime grows combinatorially.
inline LpSolution brute_force_oracle(const StandardLP& lp) {
  lp.validate();
  if (lp.num_vars() > 8 || lp.eq_rows.size() + lp.le_rows.size() > 10)
    throw DataError("brute_force_oracle: size cap exceeded");
  return detail::brute_force_impl(lp, 1e6, true);
}

}  // namespace mqrlr
